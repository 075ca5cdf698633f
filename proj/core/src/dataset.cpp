#include "trav/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "trav/errors.hpp"

namespace trav {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

namespace {

json transform_to_json(const RigidTransform& t) {
  const QuaternionXYZW q = t.quaternion();
  return json{{"tx", t.translation().x()}, {"ty", t.translation().y()}, {"tz", t.translation().z()},
              {"qx", q.x}, {"qy", q.y}, {"qz", q.z}, {"qw", q.w}};
}

double required_number(const json& j, const char* key, const fs::path& path) {
  if (!j.contains(key) || !j.at(key).is_number()) {
    throw DataError(path.string() + ": missing numeric key '" + key + "'");
  }
  return j.at(key).get<double>();
}

double parse_double(const std::string& field, const fs::path& path, std::size_t line) {
  double value = 0.0;
  const char* first = field.data();
  const char* last = first + field.size();
  auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc() || res.ptr != last) {
    throw DataError(path.string() + ":" + std::to_string(line) + ": cannot parse number '" + field + "'");
  }
  return value;
}

}  // namespace

CameraRig read_calibration(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing calibration file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  CameraRig rig;
  rig.fx = required_number(j, "fx", path);
  rig.fy = required_number(j, "fy", path);
  rig.cx = required_number(j, "cx", path);
  rig.cy = required_number(j, "cy", path);
  rig.width = static_cast<int>(required_number(j, "width", path));
  rig.height = static_cast<int>(required_number(j, "height", path));
  if (!j.contains("base_from_camera")) throw DataError(path.string() + ": missing 'base_from_camera'");
  const json& t = j.at("base_from_camera");
  try {
    rig.base_from_camera = RigidTransform::from_quaternion(
        {required_number(t, "qx", path), required_number(t, "qy", path), required_number(t, "qz", path),
         required_number(t, "qw", path)},
        {required_number(t, "tx", path), required_number(t, "ty", path), required_number(t, "tz", path)});
    rig.validate();
  } catch (const InputError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return rig;
}

void write_calibration(const fs::path& path, const CameraRig& rig) {
  json j{{"fx", rig.fx}, {"fy", rig.fy}, {"cx", rig.cx}, {"cy", rig.cy},
         {"width", rig.width}, {"height", rig.height},
         {"base_from_camera", transform_to_json(rig.base_from_camera)}};
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::vector<PoseRecord> read_poses(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing pose file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty pose file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "frame_id,timestamp,tx,ty,tz,qx,qy,qz,qw") {
    throw DataError(path.string() + ": unexpected header '" + line + "'");
  }
  std::vector<PoseRecord> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 9) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected 9 fields");
    }
    double v[8];
    for (int k = 0; k < 8; ++k) v[k] = parse_double(fields[k + 1], path, line_no);
    PoseRecord rec;
    rec.frame_id = fields[0];
    rec.pose.timestamp = v[0];
    try {
      rec.pose.world_from_base = RigidTransform::from_quaternion({v[4], v[5], v[6], v[7]}, {v[1], v[2], v[3]});
    } catch (const InputError& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    out.push_back(std::move(rec));
  }
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (!(out[i].pose.timestamp > out[i - 1].pose.timestamp)) {
      throw DataError(path.string() + ": timestamps not strictly increasing at frame " + out[i].frame_id);
    }
  }
  return out;
}

void write_poses(const fs::path& path, const std::vector<PoseRecord>& poses) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "frame_id,timestamp,tx,ty,tz,qx,qy,qz,qw\n";
  for (const auto& rec : poses) {
    const auto& t = rec.pose.world_from_base.translation();
    const QuaternionXYZW q = rec.pose.world_from_base.quaternion();
    out << rec.frame_id << ',' << format_double(rec.pose.timestamp) << ',' << format_double(t.x()) << ','
        << format_double(t.y()) << ',' << format_double(t.z()) << ',' << format_double(q.x) << ','
        << format_double(q.y) << ',' << format_double(q.z) << ',' << format_double(q.w) << '\n';
  }
}

std::vector<std::string> list_png_stems(const fs::path& dir) {
  std::vector<std::string> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") out.push_back(entry.path().stem().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace trav
