#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ocfl {

// ---- logging ---------------------------------------------------------------
// Verbosity is controlled by the OCFL_LOG environment variable:
// "error" (default), "warn", "info", or "debug". Output goes to stderr.
enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

LogLevel log_threshold();
void log_message(LogLevel level, const std::string& msg);

inline void log_error(const std::string& msg) { log_message(LogLevel::Error, msg); }
inline void log_warn(const std::string& msg) { log_message(LogLevel::Warn, msg); }
inline void log_info(const std::string& msg) { log_message(LogLevel::Info, msg); }
inline void log_debug(const std::string& msg) { log_message(LogLevel::Debug, msg); }

// ---- canonical formatting ---------------------------------------------------
// All numbers persisted to CSV go through one formatter so that identical
// values always serialise to identical bytes.
std::string fmt_double(double v);

// Exact round-trip formatting (used for model checkpoints and data files).
std::string fmt_double_exact(double v);

// ---- hashing ----------------------------------------------------------------
std::uint64_t fnv1a64(const void* data, std::size_t len);
std::uint64_t fnv1a64(const std::string& s);
std::string fnv1a64_hex(const std::string& s);

// ---- filesystem -------------------------------------------------------------
void ensure_dir(const std::string& path);
void write_file(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);
bool file_exists(const std::string& path);

// ---- CSV ---------------------------------------------------------------------
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::string serialize() const;  // header + rows, '\n' line endings
};

CsvTable parse_csv(const std::string& content);

}  // namespace ocfl
