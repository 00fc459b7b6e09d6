#pragma once

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "s2p/core/tensor.hpp"
#include "s2p/io/bytes.hpp"
#include "s2p/io/manifest.hpp"

namespace s2p {

// On-disk layout: a dataset is a directory holding manifest.txt plus one
// binary record per trajectory (traj_00000.bin, ...). Record layout, all
// little-endian:
//   u32 T
//   f32 states[(T+1) * ns]
//   u8  frames[(T+1) * R * R * 3]   (HWC, RGB)
//   f32 actions[T * na]
//   f32 rewards[T]
//   u8  done[T]

struct Trajectory {
  int ns = 0, na = 1, resolution = 0;
  std::vector<float> states;
  std::vector<uint8_t> frames;
  std::vector<float> actions;
  std::vector<float> rewards;
  std::vector<uint8_t> done;

  int T() const { return (int)rewards.size(); }
  const float* state(int t) const { return states.data() + (size_t)t * ns; }
  const uint8_t* frame(int t) const {
    return frames.data() + (size_t)t * resolution * resolution * 3;
  }
};

inline std::string traj_filename(int index) {
  char b[32];
  std::snprintf(b, sizeof b, "traj_%05d.bin", index);
  return b;
}

inline void save_trajectory(const std::string& dir, int index, const Trajectory& tr) {
  auto f = open_out(dir + "/" + traj_filename(index));
  write_pod<uint32_t>(f, (uint32_t)tr.T());
  write_array(f, tr.states.data(), tr.states.size());
  write_array(f, tr.frames.data(), tr.frames.size());
  write_array(f, tr.actions.data(), tr.actions.size());
  write_array(f, tr.rewards.data(), tr.rewards.size());
  write_array(f, tr.done.data(), tr.done.size());
}

inline Trajectory load_trajectory(const std::string& dir, int index, int ns, int na,
                                  int resolution) {
  auto f = open_in(dir + "/" + traj_filename(index));
  Trajectory tr;
  tr.ns = ns;
  tr.na = na;
  tr.resolution = resolution;
  uint32_t T = read_pod<uint32_t>(f);
  tr.states.resize((size_t)(T + 1) * ns);
  tr.frames.resize((size_t)(T + 1) * resolution * resolution * 3);
  tr.actions.resize((size_t)T * na);
  tr.rewards.resize(T);
  tr.done.resize(T);
  read_array(f, tr.states.data(), tr.states.size());
  read_array(f, tr.frames.data(), tr.frames.size());
  read_array(f, tr.actions.data(), tr.actions.size());
  read_array(f, tr.rewards.data(), tr.rewards.size());
  read_array(f, tr.done.data(), tr.done.size());
  return tr;
}

struct Dataset {
  Manifest meta;
  std::vector<Trajectory> trajs;

  int ns() const { return (int)meta.get_int("ns"); }
  int na() const { return (int)meta.get_int("na"); }
  int resolution() const { return (int)meta.get_int("resolution"); }

  int64_t n_transitions() const {
    int64_t n = 0;
    for (auto& t : trajs) n += t.T();
    return n;
  }

  static Dataset load(const std::string& dir) {
    Dataset d;
    d.meta = Manifest::load(dir + "/manifest.txt");
    int count = (int)d.meta.get_int("trajectories");
    d.trajs.reserve((size_t)count);
    for (int i = 0; i < count; ++i)
      d.trajs.push_back(load_trajectory(dir, i, d.ns(), d.na(), d.resolution()));
    return d;
  }
};

inline void save_dataset(const std::string& dir, Manifest meta,
                         const std::vector<Trajectory>& trajs) {
  std::filesystem::create_directories(dir);
  int64_t n = 0;
  for (auto& t : trajs) n += t.T();
  meta.set_int("trajectories", (long long)trajs.size());
  meta.set_int("transitions", n);
  meta.save(dir + "/manifest.txt");
  for (size_t i = 0; i < trajs.size(); ++i) save_trajectory(dir, (int)i, trajs[i]);
}

// ---- pixel codecs: frames live on disk as u8, in the nets as [-1,1] CHW ----

inline uint8_t quantize_px(float v) {
  float q = std::nearbyint((v + 1.0f) * 127.5f);
  return (uint8_t)std::clamp((int)q, 0, 255);
}
inline float dequantize_px(uint8_t q) { return (float)q / 127.5f - 1.0f; }

template <typename S>
void frame_to_chw(const uint8_t* hwc, int R, S* chw) {
  for (int y = 0; y < R; ++y)
    for (int x = 0; x < R; ++x)
      for (int c = 0; c < 3; ++c)
        chw[((int64_t)c * R + y) * R + x] = (S)dequantize_px(hwc[3 * ((int64_t)y * R + x) + c]);
}

template <typename S>
void chw_to_frame(const S* chw, int R, uint8_t* hwc) {
  for (int y = 0; y < R; ++y)
    for (int x = 0; x < R; ++x)
      for (int c = 0; c < 3; ++c)
        hwc[3 * ((int64_t)y * R + x) + c] = quantize_px((float)chw[((int64_t)c * R + y) * R + x]);
}

}  // namespace s2p
