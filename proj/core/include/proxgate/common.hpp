#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace proxgate {

/// Milliseconds since the Unix epoch, UTC.
using UtcMillis = std::int64_t;

constexpr UtcMillis kMillisPerSecond = 1000;

/// Current wall-clock time.
UtcMillis now_utc_millis();

std::string_view trim(std::string_view s);

/// Lowercase hex encoding of raw bytes.
std::string to_hex(std::span<const std::uint8_t> bytes);

/// Decodes lowercase hex into `out`. Rejects uppercase and odd lengths so
/// every identifier has exactly one textual form.
bool from_hex(std::string_view hex, std::span<std::uint8_t> out);

/// Shortest round-trip decimal rendering of a double.
std::string format_double(double value);

/// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  std::span<double> row(std::size_t i) {
    return std::span<double>(data.data() + i * cols, cols);
  }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(data.data() + i * cols, cols);
  }

  bool operator==(const Matrix&) const = default;
};

}  // namespace proxgate
