#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace proxgate::csv {

/// Splits one CSV record. Handles double-quoted fields with "" escapes;
/// does not support embedded newlines (none of our formats produce them).
std::vector<std::string> split_record(std::string_view line);

std::string join_record(const std::vector<std::string>& fields);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Reads a UTF-8 CSV file with a mandatory header row.
/// Throws IoError when the file cannot be opened and FormatError when it is
/// empty.
Table read_file(const std::filesystem::path& path);

void write_file(const std::filesystem::path& path, const Table& table);

}  // namespace proxgate::csv
