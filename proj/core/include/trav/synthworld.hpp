#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "trav/dataset.hpp"
#include "trav/geometry.hpp"
#include "trav/image_io.hpp"

namespace trav {

/// Mean color and per-cell noise amplitude of one terrain class.
struct TextureClass {
  std::array<double, 3> mean{128.0, 128.0, 128.0};
  double noise = 20.0;
};

struct Palette {
  TextureClass traversable{{150.0, 124.0, 92.0}, 14.0};
  TextureClass blocked{{62.0, 104.0, 46.0}, 30.0};
  std::array<double, 3> sky{140.0, 180.0, 225.0};
};

/// The held-out variant: same classes, different color means.
Palette shifted_palette();

struct WorldSpec {
  std::uint64_t seed = 0;
  double traversable_fraction = 0.5;  // rho, over the whole world area
  double world_size = 400.0;          // meters; the world wraps around at its edges
  double cell_size = 0.25;
  double blob_scale = 12.0;           // coarsest noise wavelength in meters
  double corridor_half_width = 2.5;   // forced traversable band around each trajectory

  double speed = 2.5;            // m/s
  double pose_rate = 10.0;       // Hz
  double frame_interval = 1.0;   // seconds between images
  double tail_seconds = 5.0;     // pose-only samples after the last image
  double turn_rate = 0.12;       // peak heading rate, rad/s

  double camera_height = 1.5;
  double camera_pitch_deg = 15.0;
  int image_width = 96;
  int image_height = 64;
  double focal = 48.0;
  double max_range = 50.0;  // ground hits farther than this are ignore-coded

  int train_frames = 200;
  int heldout_frames = 50;
  int shifted_frames = 50;
  double brightness_jitter = 0.15;

  Palette palette;
  Palette shifted = shifted_palette();

  void validate() const;
  CameraRig camera() const;
  std::string to_json() const;
};

struct SplitData {
  std::string name;
  std::vector<PoseRecord> poses;  // all samples; image frames carry ids, the rest are empty
  bool shifted = false;
};

class World {
 public:
  /// Lays out terrain and trajectories; throws InputError when the corridors
  /// alone exceed the requested traversable fraction.
  explicit World(const WorldSpec& spec);

  const WorldSpec& spec() const { return spec_; }
  const std::vector<SplitData>& splits() const { return splits_; }

  bool is_traversable(double x, double y) const;
  int cells_per_side() const { return n_; }
  double traversable_fraction() const;

  /// Renders the image and ground-truth mask of `pose` seen through the spec camera.
  void render(const RigidTransform& world_from_base, const Palette& palette, double brightness, Image8& image,
              Image8& gt) const;

 private:
  std::size_t cell_index(double x, double y) const;
  double cell_noise(std::size_t cell) const;

  WorldSpec spec_;
  int n_ = 0;
  std::vector<std::uint8_t> traversable_;
  std::vector<float> texture_;
  std::vector<SplitData> splits_;
};

/// Writes <out>/{train,heldout,heldout_shifted}/ each with images/, gt/,
/// poses.csv and calib.json, plus <out>/world.json.
void generate_world(const WorldSpec& spec, const std::filesystem::path& out, int workers = 1);

}  // namespace trav
