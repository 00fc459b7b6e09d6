#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace s2p {

static_assert(std::endian::native == std::endian::little,
              "file formats assume a little-endian host");

inline void write_bytes(std::ostream& os, const void* p, size_t n) {
  os.write(reinterpret_cast<const char*>(p), (std::streamsize)n);
}
inline void read_bytes(std::istream& is, void* p, size_t n) {
  is.read(reinterpret_cast<char*>(p), (std::streamsize)n);
  if (!is) throw std::runtime_error("unexpected end of file");
}

template <typename T>
void write_pod(std::ostream& os, T v) {
  write_bytes(os, &v, sizeof(T));
}
template <typename T>
T read_pod(std::istream& is) {
  T v;
  read_bytes(is, &v, sizeof(T));
  return v;
}

inline void write_str(std::ostream& os, const std::string& s) {
  write_pod<uint32_t>(os, (uint32_t)s.size());
  write_bytes(os, s.data(), s.size());
}
inline std::string read_str(std::istream& is) {
  uint32_t n = read_pod<uint32_t>(is);
  if (n > (1u << 24)) throw std::runtime_error("string field too long");
  std::string s(n, '\0');
  if (n) read_bytes(is, s.data(), n);
  return s;
}

template <typename T>
void write_array(std::ostream& os, const T* p, size_t n) {
  write_bytes(os, p, n * sizeof(T));
}
template <typename T>
void read_array(std::istream& is, T* p, size_t n) {
  read_bytes(is, p, n * sizeof(T));
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  return f;
}
inline std::ifstream open_in(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for read: " + path);
  return f;
}

inline std::vector<uint8_t> read_file_bytes(const std::string& path) {
  auto f = open_in(path);
  f.seekg(0, std::ios::end);
  auto n = (size_t)f.tellg();
  f.seekg(0);
  std::vector<uint8_t> buf(n);
  if (n) read_bytes(f, buf.data(), n);
  return buf;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f << text;
}

}  // namespace s2p
