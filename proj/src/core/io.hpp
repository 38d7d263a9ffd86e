#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace scnn {

std::vector<uint8_t> read_binary_file(const std::string& path);
std::string read_text_file(const std::string& path);

// Writes to <path>.tmp and renames into place, so a failed run never leaves
// behind a partially written artifact.
void write_binary_file_atomic(const std::string& path, const uint8_t* data, size_t size);
void write_text_file_atomic(const std::string& path, const std::string& text);

} // namespace scnn
