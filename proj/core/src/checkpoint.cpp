#include "trav/checkpoint.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

#include "trav/digest.hpp"
#include "trav/errors.hpp"

namespace trav {

namespace {

constexpr char kMagic[8] = {'T', 'R', 'A', 'V', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void append(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

class Cursor {
 public:
  Cursor(const std::string& bytes, const std::string& origin) : bytes_(bytes), origin_(origin) {}

  template <typename T>
  T take(const std::string& what) {
    T value;
    std::memcpy(&value, need(sizeof(T), what), sizeof(T));
    return value;
  }
  std::string take_string(std::size_t n, const std::string& what) { return std::string(need(n, what), n); }
  std::size_t position() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const char* need(std::size_t n, const std::string& what) {
    if (n > bytes_.size() - pos_) throw DataError("checkpoint " + origin_ + ": " + what + " truncated");
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  const std::string& bytes_;
  std::string origin_;
  std::size_t pos_ = 0;
};

std::size_t dtype_size(DType d) {
  switch (d) {
    case DType::F32: return 4;
    case DType::F64: return 8;
    case DType::I64: return 8;
    case DType::Bytes: return 1;
  }
  return 1;
}

}  // namespace

void RecordFile::put(Record record) {
  auto it = index_.find(record.name);
  if (it != index_.end()) {
    records_[it->second] = std::move(record);
    return;
  }
  index_.emplace(record.name, records_.size());
  records_.push_back(std::move(record));
}

void RecordFile::put_bytes(const std::string& name, const std::string& bytes) {
  put({name, DType::Bytes, {bytes.size()}, bytes});
}

void RecordFile::put_i64(const std::string& name, const std::vector<std::int64_t>& values) {
  std::string payload(values.size() * 8, '\0');
  if (!values.empty()) std::memcpy(payload.data(), values.data(), payload.size());
  put({name, DType::I64, {values.size()}, std::move(payload)});
}

void RecordFile::put_f64(const std::string& name, const std::vector<double>& values) {
  std::string payload(values.size() * 8, '\0');
  if (!values.empty()) std::memcpy(payload.data(), values.data(), payload.size());
  put({name, DType::F64, {values.size()}, std::move(payload)});
}

template <typename S>
void RecordFile::put_matrix(const std::string& name, const RowMatrix<S>& m) {
  Record r;
  r.name = name;
  r.dtype = sizeof(S) == 4 ? DType::F32 : DType::F64;
  r.shape = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
  r.payload.resize(static_cast<std::size_t>(m.size()) * sizeof(S));
  if (m.size() > 0) std::memcpy(r.payload.data(), m.data(), r.payload.size());
  put(std::move(r));
}

const Record& RecordFile::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw DataError("checkpoint: missing record '" + name + "'");
  return records_[it->second];
}

std::string RecordFile::get_bytes(const std::string& name) const {
  const Record& r = get(name);
  if (r.dtype != DType::Bytes) throw DataError("checkpoint: record '" + name + "' is not a byte string");
  return r.payload;
}

std::vector<std::int64_t> RecordFile::get_i64(const std::string& name) const {
  const Record& r = get(name);
  if (r.dtype != DType::I64) throw DataError("checkpoint: record '" + name + "' is not int64");
  std::vector<std::int64_t> out(r.payload.size() / 8);
  if (!out.empty()) std::memcpy(out.data(), r.payload.data(), r.payload.size());
  return out;
}

std::vector<double> RecordFile::get_f64(const std::string& name) const {
  const Record& r = get(name);
  if (r.dtype != DType::F64) throw DataError("checkpoint: record '" + name + "' is not float64");
  std::vector<double> out(r.payload.size() / 8);
  if (!out.empty()) std::memcpy(out.data(), r.payload.data(), r.payload.size());
  return out;
}

template <typename S>
RowMatrix<S> RecordFile::get_matrix(const std::string& name) const {
  const Record& r = get(name);
  if (r.shape.size() != 2) throw DataError("checkpoint: record '" + name + "' is not a matrix");
  const auto rows = static_cast<Eigen::Index>(r.shape[0]);
  const auto cols = static_cast<Eigen::Index>(r.shape[1]);
  if (r.dtype == DType::F32) {
    RowMatrix<float> m(rows, cols);
    if (m.size() > 0) std::memcpy(m.data(), r.payload.data(), r.payload.size());
    return m.template cast<S>();
  }
  if (r.dtype == DType::F64) {
    RowMatrix<double> m(rows, cols);
    if (m.size() > 0) std::memcpy(m.data(), r.payload.data(), r.payload.size());
    return m.template cast<S>();
  }
  throw DataError("checkpoint: record '" + name + "' is not a floating-point matrix");
}

std::string RecordFile::serialize() const {
  std::string out(kMagic, sizeof(kMagic));
  append<std::uint32_t>(out, kVersion);
  append<std::uint32_t>(out, static_cast<std::uint32_t>(records_.size()));
  for (const Record& r : records_) {
    std::string rec;
    append<std::uint32_t>(rec, static_cast<std::uint32_t>(r.name.size()));
    rec += r.name;
    append<std::uint8_t>(rec, static_cast<std::uint8_t>(r.dtype));
    append<std::uint32_t>(rec, static_cast<std::uint32_t>(r.shape.size()));
    for (auto d : r.shape) append<std::uint64_t>(rec, d);
    append<std::uint64_t>(rec, r.payload.size());
    rec += r.payload;
    const auto crc = static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(rec.data()), static_cast<uInt>(rec.size())));
    append<std::uint32_t>(rec, crc);
    out += rec;
  }
  return out;
}

void RecordFile::write(const std::filesystem::path& path) const {
  const std::string bytes = serialize();
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("cannot write checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

RecordFile RecordFile::read(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) throw DataError("checkpoint not found: " + path.string());
  return parse(read_file_bytes(path), path.string());
}

RecordFile RecordFile::parse(const std::string& bytes, const std::string& origin) {
  Cursor cur(bytes, origin);
  if (cur.take_string(sizeof(kMagic), "header") != std::string(kMagic, sizeof(kMagic))) {
    throw DataError("checkpoint " + origin + ": bad magic");
  }
  const auto version = cur.take<std::uint32_t>("header");
  if (version != kVersion) throw DataError("checkpoint " + origin + ": unsupported version " + std::to_string(version));
  const auto count = cur.take<std::uint32_t>("header");
  RecordFile file;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string label = "record #" + std::to_string(i);
    const std::size_t start = cur.position();
    const auto name_len = cur.take<std::uint32_t>(label);
    if (name_len > bytes.size()) throw DataError("checkpoint " + origin + ": " + label + " has a corrupt name length");
    Record r;
    r.name = cur.take_string(name_len, label);
    const std::string named = label + " '" + r.name + "'";
    const auto dtype = cur.take<std::uint8_t>(named);
    if (dtype > 3) throw DataError("checkpoint " + origin + ": " + named + " has unknown dtype");
    r.dtype = static_cast<DType>(dtype);
    const auto ndim = cur.take<std::uint32_t>(named);
    if (ndim > 8) throw DataError("checkpoint " + origin + ": " + named + " has corrupt shape");
    std::uint64_t elements = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      r.shape.push_back(cur.take<std::uint64_t>(named));
      elements *= r.shape.back();
    }
    const auto size = cur.take<std::uint64_t>(named);
    if (size > bytes.size()) throw DataError("checkpoint " + origin + ": " + named + " truncated");
    r.payload = cur.take_string(static_cast<std::size_t>(size), named);
    const std::size_t end = cur.position();
    const auto stored = cur.take<std::uint32_t>(named);
    const auto actual = static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(bytes.data() + start), static_cast<uInt>(end - start)));
    if (stored != actual) throw DataError("checkpoint " + origin + ": " + named + " failed its checksum");
    if (elements * dtype_size(r.dtype) != size) {
      throw DataError("checkpoint " + origin + ": " + named + " payload does not match its shape");
    }
    file.put(std::move(r));
  }
  if (!cur.done()) throw DataError("checkpoint " + origin + ": trailing bytes after the last record");
  return file;
}

template void RecordFile::put_matrix<float>(const std::string&, const RowMatrix<float>&);
template void RecordFile::put_matrix<double>(const std::string&, const RowMatrix<double>&);
template RowMatrix<float> RecordFile::get_matrix<float>(const std::string&) const;
template RowMatrix<double> RecordFile::get_matrix<double>(const std::string&) const;

}  // namespace trav
