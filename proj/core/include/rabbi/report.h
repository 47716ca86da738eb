#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace rabbi {

inline constexpr std::string_view kToolVersion = "0.1.0";

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a header column; throws InputError if absent.
  std::size_t column(std::string_view name) const;
};

// Metadata attached to every report file.
struct Provenance {
  std::string tool_version{kToolVersion};
  std::string config_hash;
  std::uint64_t seed = 0;
  // (file name, sha256 hex digest)
  std::vector<std::pair<std::string, std::string>> inputs;

  std::vector<std::string> header_lines() const;
};

// Shortest representation that round-trips to the same double.
std::string format_double(double value);
// Inverse of format_double ("NA" gives NaN). Throws InputError.
double parse_double(std::string_view text);
long long parse_int(std::string_view text);

std::string sha256_hex(std::string_view bytes);
std::string file_sha256(const std::filesystem::path& path);

// RFC 4180 quoting; provenance goes in leading "# " comment lines.
std::string to_csv_string(const CsvTable& table, const Provenance* provenance = nullptr);
void write_csv(const std::filesystem::path& path, const CsvTable& table, const Provenance* provenance = nullptr);
// Skips leading "#" comment lines.
CsvTable parse_csv(std::string_view text);
CsvTable read_csv(const std::filesystem::path& path);

void write_text_file(const std::filesystem::path& path, std::string_view contents);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace rabbi
