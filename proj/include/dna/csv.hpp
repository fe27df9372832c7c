#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace dna {

// RFC 4180-style quoting for one field.
std::string csv_field(const std::string& s);
std::vector<std::string> split_csv_line(const std::string& line, std::size_t lineno);
// Blank lines are skipped; CRLF accepted.
std::vector<std::vector<std::string>> parse_csv(const std::string& text);

}  // namespace dna
