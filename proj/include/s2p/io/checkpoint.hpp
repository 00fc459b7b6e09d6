#pragma once

#include "s2p/core/adam.hpp"
#include "s2p/io/bytes.hpp"

namespace s2p {

/// Versioned binary container: ordered meta strings + named f32 arrays.
struct Checkpoint {
  static constexpr char kMagic[9] = "S2PCKPT1";

  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<std::pair<std::string, Tensor>> arrays;

  void set_meta(const std::string& k, std::string v) {
    for (auto& it : meta)
      if (it.first == k) {
        it.second = std::move(v);
        return;
      }
    meta.emplace_back(k, std::move(v));
  }
  bool has_meta(const std::string& k) const {
    for (auto& it : meta)
      if (it.first == k) return true;
    return false;
  }
  const std::string& get_meta(const std::string& k) const {
    for (auto& it : meta)
      if (it.first == k) return it.second;
    throw std::out_of_range("checkpoint meta missing: " + k);
  }

  void add(std::string name, Tensor t) { arrays.emplace_back(std::move(name), std::move(t)); }
  bool has(const std::string& name) const {
    for (auto& it : arrays)
      if (it.first == name) return true;
    return false;
  }
  const Tensor& find(const std::string& name) const {
    for (auto& it : arrays)
      if (it.first == name) return it.second;
    throw std::out_of_range("checkpoint array missing: " + name);
  }

  void save(const std::string& path) const {
    auto f = open_out(path);
    write_bytes(f, kMagic, 8);
    write_pod<uint32_t>(f, (uint32_t)meta.size());
    for (auto& it : meta) {
      write_str(f, it.first);
      write_str(f, it.second);
    }
    write_pod<uint32_t>(f, (uint32_t)arrays.size());
    for (auto& it : arrays) {
      write_str(f, it.first);
      write_pod<uint8_t>(f, 0);  // dtype f32
      write_pod<uint32_t>(f, (uint32_t)it.second.shape.size());
      for (int d : it.second.shape) write_pod<uint32_t>(f, (uint32_t)d);
      write_array(f, it.second.ptr(), (size_t)it.second.numel());
    }
    if (!f) throw std::runtime_error("checkpoint write failed: " + path);
  }

  static Checkpoint load(const std::string& path) {
    auto f = open_in(path);
    char magic[8];
    read_bytes(f, magic, 8);
    if (std::memcmp(magic, kMagic, 8) != 0)
      throw std::runtime_error("not a checkpoint file: " + path);
    Checkpoint c;
    uint32_t nm = read_pod<uint32_t>(f);
    for (uint32_t i = 0; i < nm; ++i) {
      auto k = read_str(f);
      auto v = read_str(f);
      c.meta.emplace_back(std::move(k), std::move(v));
    }
    uint32_t na = read_pod<uint32_t>(f);
    for (uint32_t i = 0; i < na; ++i) {
      auto name = read_str(f);
      uint8_t dt = read_pod<uint8_t>(f);
      if (dt != 0) throw std::runtime_error("unknown array dtype in " + path);
      uint32_t rank = read_pod<uint32_t>(f);
      Shape sh(rank);
      for (auto& d : sh) d = (int)read_pod<uint32_t>(f);
      Tensor t(sh);
      read_array(f, t.ptr(), (size_t)t.numel());
      c.arrays.emplace_back(std::move(name), std::move(t));
    }
    return c;
  }
};

/// Serialize a model's trainable state (+ optimizer moments and buffers).
template <typename S>
void checkpoint_pack(Checkpoint& c, const ParamStoreT<S>& ps, const AdamT<S>* opt = nullptr,
                     const std::string& opt_key = "adam.t") {
  for (auto& p : ps.params) c.add(p.name, p.var->val.template cast<float>());
  for (auto& b : ps.buffers) c.add(b.first, b.second->template cast<float>());
  if (opt) {
    c.set_meta(opt_key, std::to_string(opt->t));
    for (size_t i = 0; i < opt->m.size(); ++i) {
      c.add(ps.params[i].name + "#m", opt->m[i].template cast<float>());
      c.add(ps.params[i].name + "#v", opt->v[i].template cast<float>());
    }
  }
}

template <typename S>
void checkpoint_unpack(const Checkpoint& c, ParamStoreT<S>& ps, AdamT<S>* opt = nullptr,
                       const std::string& opt_key = "adam.t") {
  for (auto& p : ps.params) {
    const Tensor& t = c.find(p.name);
    if (t.shape != p.var->val.shape)
      throw std::runtime_error("checkpoint shape mismatch for " + p.name + ": " +
                               shape_str(t.shape) + " vs " + shape_str(p.var->val.shape));
    p.var->val = t.cast<S>();
  }
  for (auto& b : ps.buffers) {
    const Tensor& t = c.find(b.first);
    if (t.shape != b.second->shape)
      throw std::runtime_error("checkpoint shape mismatch for " + b.first);
    *b.second = t.cast<S>();
  }
  if (opt) {
    opt->ensure(ps);
    opt->t = std::stoll(c.get_meta(opt_key));
    for (size_t i = 0; i < ps.params.size(); ++i) {
      const Tensor& tm = c.find(ps.params[i].name + "#m");
      const Tensor& tv = c.find(ps.params[i].name + "#v");
      opt->m[i] = tm.cast<S>();
      opt->v[i] = tv.cast<S>();
    }
  }
}

}  // namespace s2p
