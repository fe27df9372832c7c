#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <string>

namespace dna {

// Calls fn(record, line_number) for every non-blank line. A line that does not
// parse as a JSON object raises ParseError naming the file and line, including
// a truncated final line.
void read_jsonl(const std::filesystem::path& path,
                const std::function<void(const nlohmann::json&, std::size_t)>& fn);

// Appends one compact JSON line and flushes.
void append_jsonl(const std::filesystem::path& path, const nlohmann::json& record);

std::string read_text_file(const std::filesystem::path& path);
// Writes through a temporary file and renames it into place.
void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace dna
