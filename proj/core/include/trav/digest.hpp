#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace trav {

std::string sha256_hex(std::string_view bytes);

/// Git blob id: SHA-1 of "blob <size>\0" followed by the content.
std::string git_blob_id(std::string_view bytes);

std::string read_file_bytes(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

/// Tree-style digest over regular files: SHA-1 over sorted "<blob id> <relative path>\n"
/// lines. Directories are walked recursively; missing paths contribute "missing <path>".
std::string content_digest(std::span<const std::filesystem::path> inputs);

}  // namespace trav
