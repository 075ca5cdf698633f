#include "trav/digest.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <fstream>
#include <iterator>
#include <memory>
#include <sstream>

#include "trav/errors.hpp"

namespace trav {

namespace fs = std::filesystem;

namespace {

std::string digest_hex(const EVP_MD* md, std::string_view prefix, std::string_view bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  unsigned char out[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), md, nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), prefix.data(), prefix.size()) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), out, &len) != 1) {
    throw std::runtime_error("digest computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex(2 * len, '0');
  for (unsigned int i = 0; i < len; ++i) {
    hex[2 * i] = kHex[out[i] >> 4];
    hex[2 * i + 1] = kHex[out[i] & 0xF];
  }
  return hex;
}

}  // namespace

std::string sha256_hex(std::string_view bytes) { return digest_hex(EVP_sha256(), {}, bytes); }

std::string git_blob_id(std::string_view bytes) {
  std::string header = "blob " + std::to_string(bytes.size());
  header.push_back('\0');
  return digest_hex(EVP_sha1(), header, bytes);
}

std::string read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text_file(const fs::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw DataError("failed writing " + path.string());
}

std::string content_digest(std::span<const fs::path> inputs) {
  std::vector<std::string> lines;
  for (const auto& input : inputs) {
    if (fs::is_regular_file(input)) {
      lines.push_back(git_blob_id(read_file_bytes(input)) + " " + input.filename().string());
    } else if (fs::is_directory(input)) {
      for (const auto& entry : fs::recursive_directory_iterator(input)) {
        if (!entry.is_regular_file()) continue;
        const auto rel = fs::relative(entry.path(), input.parent_path());
        lines.push_back(git_blob_id(read_file_bytes(entry.path())) + " " + rel.generic_string());
      }
    } else {
      lines.push_back("missing " + input.generic_string());
    }
  }
  std::sort(lines.begin(), lines.end());
  std::ostringstream joined;
  for (const auto& l : lines) joined << l << '\n';
  return digest_hex(EVP_sha1(), {}, joined.str());
}

}  // namespace trav
