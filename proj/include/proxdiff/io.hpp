#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include <Eigen/Core>

namespace proxdiff {

// FNV-1a over raw bytes; the checksum used by checkpoints and the manifest.
std::uint64_t fnv1a64(const char* data, std::size_t n);
std::uint64_t fnv1a64_file(const std::string& path);

// Shortest decimal string that parses back to exactly the same double.
std::string format_f64(double v);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

// One row per matrix row, comma-separated round-trip floats, no header.
// Matrices beyond max_rows are thinned by a deterministic stride.
void write_sample_csv(const std::string& path, const Eigen::MatrixXd& rows,
                      int max_rows = 100000);
Eigen::MatrixXd read_sample_csv(const std::string& path);

}  // namespace proxdiff
