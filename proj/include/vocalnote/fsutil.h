#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace vocalnote {

namespace fs = std::filesystem;

/// Whole-file read; throws Io (or MissingInput when the file is absent).
std::string read_file(const fs::path& path);

/// Writes to a sibling temporary file and renames it over `path`, so readers
/// never observe a partial file. Parent directories are created.
void write_file_atomic(const fs::path& path, std::string_view content);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);
std::string sha256_file(const fs::path& path);

/// Stable 31-bit seed derived from a global seed and a key.
std::uint32_t derive_seed(std::uint64_t seed, std::string_view key);

} // namespace vocalnote
