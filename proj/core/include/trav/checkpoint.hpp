#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "trav/objectives.hpp"

namespace trav {

enum class DType : std::uint8_t { F32 = 0, F64 = 1, Bytes = 2, I64 = 3 };

/// One named array. Payload bytes are little-endian, row-major.
struct Record {
  std::string name;
  DType dtype = DType::Bytes;
  std::vector<std::uint64_t> shape;
  std::string payload;
};

/// Binary checkpoint container:
///   magic "TRAVCKPT", u32 version, u32 record count, then per record
///   u32 name length, name, u8 dtype, u32 ndim, u64 dims[ndim], u64 payload
///   size, payload, u32 CRC-32 of all preceding record bytes.
class RecordFile {
 public:
  void put_bytes(const std::string& name, const std::string& bytes);
  void put_i64(const std::string& name, const std::vector<std::int64_t>& values);
  void put_f64(const std::string& name, const std::vector<double>& values);
  template <typename S>
  void put_matrix(const std::string& name, const RowMatrix<S>& m);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  const Record& get(const std::string& name) const;
  std::string get_bytes(const std::string& name) const;
  std::vector<std::int64_t> get_i64(const std::string& name) const;
  std::vector<double> get_f64(const std::string& name) const;
  /// Converts between F32 and F64 storage when needed.
  template <typename S>
  RowMatrix<S> get_matrix(const std::string& name) const;

  const std::vector<Record>& records() const { return records_; }

  std::string serialize() const;
  void write(const std::filesystem::path& path) const;
  /// Throws DataError naming the failing record on truncation or checksum mismatch.
  static RecordFile read(const std::filesystem::path& path);
  static RecordFile parse(const std::string& bytes, const std::string& origin);

 private:
  void put(Record record);

  std::vector<Record> records_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace trav
