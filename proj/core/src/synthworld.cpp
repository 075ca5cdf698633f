#include "trav/synthworld.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "json.hpp"
#include "trav/digest.hpp"
#include "trav/errors.hpp"
#include "trav/parallel.hpp"
#include "trav/rng.hpp"

namespace trav {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kTerrainTag = 0x7465727261ull;
constexpr std::uint64_t kTrajectoryTag = 0x7472616aull;
constexpr std::uint64_t kFrameTag = 0x6672616dull;

const char* const kSplitNames[] = {"train", "heldout", "heldout_shifted"};

double wrap(double v, double period) {
  const double r = std::fmod(v, period);
  return r < 0.0 ? r + period : r;
}

// Periodic value noise: a lattice of uniform values with smooth interpolation.
class ValueNoise {
 public:
  ValueNoise(Rng& rng, int lattice) : lattice_(lattice), values_(static_cast<std::size_t>(lattice) * lattice) {
    for (auto& v : values_) v = rng.uniform();
  }

  // u, v in lattice units, wrapped.
  double sample(double u, double v) const {
    const double fu = std::floor(u);
    const double fv = std::floor(v);
    const double tu = smooth(u - fu);
    const double tv = smooth(v - fv);
    const int i0 = static_cast<int>(wrap(fu, lattice_));
    const int j0 = static_cast<int>(wrap(fv, lattice_));
    const int i1 = (i0 + 1) % lattice_;
    const int j1 = (j0 + 1) % lattice_;
    const double a = at(i0, j0) * (1 - tu) + at(i1, j0) * tu;
    const double b = at(i0, j1) * (1 - tu) + at(i1, j1) * tu;
    return a * (1 - tv) + b * tv;
  }

 private:
  static double smooth(double t) { return t * t * (3.0 - 2.0 * t); }
  double at(int i, int j) const { return values_[static_cast<std::size_t>(j) * lattice_ + i]; }

  int lattice_;
  std::vector<double> values_;
};

std::string frame_id(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06d", index);
  return buf;
}

}  // namespace

Palette shifted_palette() {
  Palette p;
  p.traversable = {{176.0, 150.0, 128.0}, 14.0};
  p.blocked = {{84.0, 116.0, 80.0}, 30.0};
  p.sky = {170.0, 190.0, 210.0};
  return p;
}

void WorldSpec::validate() const {
  auto fail = [](const std::string& m) { throw InputError("world spec: " + m); };
  if (!(traversable_fraction > 0.0 && traversable_fraction <= 1.0)) fail("traversable_fraction must be in (0, 1]");
  if (!(world_size > 0.0) || !(cell_size > 0.0) || world_size / cell_size > 8192.0) fail("bad world_size/cell_size");
  if (!(blob_scale >= cell_size)) fail("blob_scale must be >= cell_size");
  if (!(corridor_half_width >= 0.0)) fail("corridor_half_width must be >= 0");
  if (!(speed > 0.0) || !(pose_rate > 0.0) || !(frame_interval > 0.0) || !(tail_seconds >= 0.0)) {
    fail("speed, pose_rate and frame_interval must be > 0");
  }
  const double per_frame = frame_interval * pose_rate;
  if (std::abs(per_frame - std::round(per_frame)) > 1e-9) fail("frame_interval * pose_rate must be an integer");
  if (!(camera_height > 0.0) || !(camera_pitch_deg > 0.0 && camera_pitch_deg < 90.0)) fail("bad camera mount");
  if (image_width < 1 || image_height < 1 || !(focal > 0.0) || !(max_range > 0.0)) fail("bad camera intrinsics");
  if (train_frames < 0 || heldout_frames < 0 || shifted_frames < 0) fail("frame counts must be >= 0");
  if (!(brightness_jitter >= 0.0 && brightness_jitter < 1.0)) fail("brightness_jitter must be in [0, 1)");
}

CameraRig WorldSpec::camera() const {
  CameraRig rig;
  rig.fx = focal;
  rig.fy = focal;
  rig.cx = image_width / 2.0;
  rig.cy = image_height / 2.0;
  rig.width = image_width;
  rig.height = image_height;
  rig.base_from_camera = forward_camera_mount(camera_height, camera_pitch_deg * std::numbers::pi / 180.0);
  return rig;
}

std::string WorldSpec::to_json() const {
  auto texture = [](const TextureClass& t) { return nlohmann::json{{"mean", t.mean}, {"noise", t.noise}}; };
  auto palette_json = [&](const Palette& p) {
    return nlohmann::json{{"traversable", texture(p.traversable)}, {"blocked", texture(p.blocked)}, {"sky", p.sky}};
  };
  const nlohmann::json j = {
      {"seed", seed},
      {"traversable_fraction", traversable_fraction},
      {"world_size", world_size},
      {"cell_size", cell_size},
      {"blob_scale", blob_scale},
      {"corridor_half_width", corridor_half_width},
      {"speed", speed},
      {"pose_rate", pose_rate},
      {"frame_interval", frame_interval},
      {"tail_seconds", tail_seconds},
      {"turn_rate", turn_rate},
      {"camera_height", camera_height},
      {"camera_pitch_deg", camera_pitch_deg},
      {"image_width", image_width},
      {"image_height", image_height},
      {"focal", focal},
      {"max_range", max_range},
      {"train_frames", train_frames},
      {"heldout_frames", heldout_frames},
      {"shifted_frames", shifted_frames},
      {"brightness_jitter", brightness_jitter},
      {"palette", palette_json(palette)},
      {"shifted_palette", palette_json(shifted)},
  };
  return j.dump(2) + "\n";
}

World::World(const WorldSpec& spec) : spec_(spec) {
  spec_.validate();
  n_ = static_cast<int>(std::lround(spec_.world_size / spec_.cell_size));
  const std::size_t cells = static_cast<std::size_t>(n_) * n_;

  // Blob field: three octaves of periodic value noise.
  Rng terrain = Rng::derive(spec_.seed, kTerrainTag);
  std::vector<ValueNoise> octaves;
  std::vector<double> scale;
  for (int o = 0; o < 3; ++o) {
    const int lattice = std::max(1, static_cast<int>(std::lround(spec_.world_size / (spec_.blob_scale / (1 << o)))));
    octaves.emplace_back(terrain, lattice);
    scale.push_back(lattice / spec_.world_size);
  }
  std::vector<float> field(cells);
  for (int j = 0; j < n_; ++j) {
    for (int i = 0; i < n_; ++i) {
      const double x = (i + 0.5) * spec_.cell_size;
      const double y = (j + 0.5) * spec_.cell_size;
      double v = 0.0;
      double amp = 1.0;
      for (std::size_t o = 0; o < octaves.size(); ++o) {
        v += amp * octaves[o].sample(x * scale[o], y * scale[o]);
        amp *= 0.5;
      }
      field[static_cast<std::size_t>(j) * n_ + i] = static_cast<float>(v);
    }
  }
  texture_.resize(cells);
  for (auto& t : texture_) t = static_cast<float>(terrain.uniform(-1.0, 1.0));

  // Trajectories: smooth heading-rate curves, one per split.
  const int per_frame = static_cast<int>(std::lround(spec_.frame_interval * spec_.pose_rate));
  const int tail = static_cast<int>(std::ceil(spec_.tail_seconds * spec_.pose_rate - 1e-9));
  const int counts[] = {spec_.train_frames, spec_.heldout_frames, spec_.shifted_frames};
  const double dt = 1.0 / spec_.pose_rate;
  std::vector<std::uint8_t> corridor(cells, 0);
  const int reach = static_cast<int>(std::ceil(spec_.corridor_half_width / spec_.cell_size)) + 1;
  auto carve = [&](double px, double py) {
    const int ci = static_cast<int>(std::floor(wrap(px, spec_.world_size) / spec_.cell_size));
    const int cj = static_cast<int>(std::floor(wrap(py, spec_.world_size) / spec_.cell_size));
    const double wx = wrap(px, spec_.world_size);
    const double wy = wrap(py, spec_.world_size);
    for (int dj = -reach; dj <= reach; ++dj) {
      for (int di = -reach; di <= reach; ++di) {
        const int i = ci + di;
        const int j = cj + dj;
        // Nearest point of the cell to (wx, wy), in unwrapped cell coordinates.
        const double nx = std::clamp(wx, i * spec_.cell_size, (i + 1) * spec_.cell_size);
        const double ny = std::clamp(wy, j * spec_.cell_size, (j + 1) * spec_.cell_size);
        if (std::hypot(nx - wx, ny - wy) > spec_.corridor_half_width) continue;
        const int wi = ((i % n_) + n_) % n_;
        const int wj = ((j % n_) + n_) % n_;
        corridor[static_cast<std::size_t>(wj) * n_ + wi] = 1;
      }
    }
  };

  for (int s = 0; s < 3; ++s) {
    SplitData split;
    split.name = kSplitNames[s];
    split.shifted = s == 2;
    if (counts[s] == 0) {
      splits_.push_back(std::move(split));
      continue;
    }
    Rng rng = Rng::derive(spec_.seed, kTrajectoryTag, static_cast<std::uint64_t>(s));
    double x = rng.uniform(0.0, spec_.world_size);
    double y = rng.uniform(0.0, spec_.world_size);
    double heading = rng.uniform(-std::numbers::pi, std::numbers::pi);
    double amp[2];
    double period[2];
    double phase[2];
    for (int k = 0; k < 2; ++k) {
      amp[k] = spec_.turn_rate * rng.uniform(0.3, 0.7);
      period[k] = rng.uniform(15.0, 60.0);
      phase[k] = rng.uniform(0.0, 2.0 * std::numbers::pi);
    }
    auto turn = [&](double t) {
      double w = 0.0;
      for (int k = 0; k < 2; ++k) w += amp[k] * std::sin(2.0 * std::numbers::pi * t / period[k] + phase[k]);
      return w;
    };
    const int samples = (counts[s] - 1) * per_frame + 1 + tail;
    for (int k = 0; k < samples; ++k) {
      const double t = k * dt;
      PoseRecord rec;
      if (k % per_frame == 0 && k / per_frame < counts[s]) rec.frame_id = frame_id(k / per_frame);
      rec.pose.timestamp = t;
      rec.pose.world_from_base = RigidTransform::from_yaw(heading, Eigen::Vector3d(x, y, 0.0));
      split.poses.push_back(rec);
      // Sub-sample the segment to the next pose densely enough for the corridor.
      const int sub = std::max(1, static_cast<int>(std::ceil(spec_.speed * dt / (0.5 * spec_.cell_size))));
      const double mid_heading = heading + 0.5 * dt * turn(t + 0.5 * dt);
      for (int q = 0; q < sub; ++q) {
        const double f = static_cast<double>(q) / sub;
        carve(x + f * spec_.speed * dt * std::cos(mid_heading), y + f * spec_.speed * dt * std::sin(mid_heading));
      }
      x += spec_.speed * dt * std::cos(mid_heading);
      y += spec_.speed * dt * std::sin(mid_heading);
      heading += dt * turn(t + 0.5 * dt);
    }
    carve(x, y);
    splits_.push_back(std::move(split));
  }

  // Threshold the blob field so that corridor plus blobs covers rho of the world.
  const auto forced = static_cast<std::size_t>(std::count(corridor.begin(), corridor.end(), std::uint8_t{1}));
  const auto target = static_cast<std::size_t>(std::llround(spec_.traversable_fraction * static_cast<double>(cells)));
  if (forced > target) {
    char msg[200];
    std::snprintf(msg, sizeof(msg),
                  "trajectory corridors cover %.3f of the world, more than traversable_fraction %.3f; "
                  "use a larger traversable_fraction",
                  static_cast<double>(forced) / static_cast<double>(cells), spec_.traversable_fraction);
    throw InputError(msg);
  }
  std::vector<std::size_t> free_cells;
  free_cells.reserve(cells - forced);
  for (std::size_t c = 0; c < cells; ++c) {
    if (!corridor[c]) free_cells.push_back(c);
  }
  const std::size_t extra = target - forced;
  traversable_ = corridor;
  if (extra > 0) {
    std::nth_element(free_cells.begin(), free_cells.begin() + static_cast<std::ptrdiff_t>(extra - 1), free_cells.end(),
                     [&](std::size_t a, std::size_t b) {
                       return field[a] != field[b] ? field[a] > field[b] : a < b;
                     });
    for (std::size_t k = 0; k < extra; ++k) traversable_[free_cells[k]] = 1;
  }
}

std::size_t World::cell_index(double x, double y) const {
  const int i = std::min(n_ - 1, static_cast<int>(std::floor(wrap(x, spec_.world_size) / spec_.cell_size)));
  const int j = std::min(n_ - 1, static_cast<int>(std::floor(wrap(y, spec_.world_size) / spec_.cell_size)));
  return static_cast<std::size_t>(j) * n_ + i;
}

bool World::is_traversable(double x, double y) const { return traversable_[cell_index(x, y)] != 0; }

double World::cell_noise(std::size_t cell) const { return texture_[cell]; }

double World::traversable_fraction() const {
  return static_cast<double>(std::count(traversable_.begin(), traversable_.end(), std::uint8_t{1})) /
         static_cast<double>(traversable_.size());
}

void World::render(const RigidTransform& world_from_base, const Palette& palette, double brightness, Image8& image,
                   Image8& gt) const {
  const CameraRig rig = spec_.camera();
  const RigidTransform world_from_camera = world_from_base * rig.base_from_camera;
  const Eigen::Matrix3d& r = world_from_camera.rotation();
  const Eigen::Vector3d& o = world_from_camera.translation();
  image = Image8(rig.width, rig.height, 3);
  gt = Image8(rig.width, rig.height, 1);
  for (int row = 0; row < rig.height; ++row) {
    for (int col = 0; col < rig.width; ++col) {
      const Eigen::Vector3d ray_cam((col + 0.5 - rig.cx) / rig.fx, (row + 0.5 - rig.cy) / rig.fy, 1.0);
      const Eigen::Vector3d d = r * ray_cam;
      std::array<double, 3> color = palette.sky;
      std::uint8_t label = kMaskIgnore;
      if (d.z() < -1e-12) {
        const double t = -o.z() / d.z();
        const double hx = o.x() + t * d.x();
        const double hy = o.y() + t * d.y();
        const std::size_t cell = cell_index(hx, hy);
        const bool trav = traversable_[cell] != 0;
        const TextureClass& tex = trav ? palette.traversable : palette.blocked;
        const double n = cell_noise(cell);
        const double range = std::hypot(hx - o.x(), hy - o.y());
        const double haze = std::min(1.0, range / (3.0 * spec_.max_range));
        for (int c = 0; c < 3; ++c) {
          const double ground = tex.mean[c] + tex.noise * n;
          color[c] = (1.0 - haze) * ground + haze * palette.sky[c];
        }
        if (range <= spec_.max_range) label = trav ? kMaskPositive : 0;
      }
      for (int c = 0; c < 3; ++c) {
        image.at(row, col, c) = static_cast<std::uint8_t>(std::lround(std::clamp(color[c] * brightness, 0.0, 255.0)));
      }
      gt.at(row, col) = label;
    }
  }
}

void generate_world(const WorldSpec& spec, const fs::path& out, int workers) {
  const World world(spec);
  const CameraRig rig = world.spec().camera();
  fs::create_directories(out);
  write_text_file(out / "world.json", world.spec().to_json());
  for (std::size_t s = 0; s < world.splits().size(); ++s) {
    const SplitData& split = world.splits()[s];
    const DatasetLayout layout{out / split.name};
    fs::create_directories(layout.images_dir());
    fs::create_directories(layout.gt_dir());
    write_calibration(layout.calib_file(), rig);
    write_poses(layout.poses_file(), split.poses);
    std::vector<const PoseRecord*> frames;
    for (const auto& p : split.poses) {
      if (!p.frame_id.empty()) frames.push_back(&p);
    }
    const Palette& palette = split.shifted ? world.spec().shifted : world.spec().palette;
    parallel_for(frames.size(), workers, [&](std::size_t i) {
      Rng rng = Rng::derive(spec.seed, kFrameTag, s, i);
      const double brightness = 1.0 + rng.uniform(-spec.brightness_jitter, spec.brightness_jitter);
      Image8 image;
      Image8 gt;
      world.render(frames[i]->pose.world_from_base, palette, brightness, image, gt);
      write_png(layout.image_path(frames[i]->frame_id), image);
      write_png(layout.gt_path(frames[i]->frame_id), gt);
    });
  }
}

}  // namespace trav
