#pragma once

// Tiny stderr logger shared by the library and the CLI.

#include <atomic>
#include <iostream>
#include <mutex>
#include <string>

namespace dna::log {

enum class Level { Debug = 0, Info = 1, Warn = 2, Error = 3, Off = 4 };

inline std::atomic<Level>& threshold() {
    static std::atomic<Level> level{Level::Warn};
    return level;
}

inline void set_level(Level l) { threshold().store(l); }

inline void write(Level l, const std::string& msg) {
    if (l < threshold().load()) return;
    static std::mutex mu;
    static const char* names[] = {"debug", "info", "warning", "error"};
    std::lock_guard lock(mu);
    std::cerr << "[" << names[static_cast<int>(l)] << "] " << msg << '\n';
}

inline void debug(const std::string& m) { write(Level::Debug, m); }
inline void info(const std::string& m) { write(Level::Info, m); }
inline void warn(const std::string& m) { write(Level::Warn, m); }
inline void error(const std::string& m) { write(Level::Error, m); }

}  // namespace dna::log
