#pragma once

#include <string>

namespace ib {

// Writes content to a sibling temp file, then renames over path, so readers
// never observe a partially written file.
void write_file_atomic(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

void make_dirs(const std::string& path);

// Fixed-width-free double formatting with 17 significant digits, enough to
// round-trip any double exactly.
std::string format_double(double value);

}  // namespace ib
