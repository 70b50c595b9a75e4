#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>
#include <vector>

#include "omm/errors.hpp"
#include "omm/types.hpp"

namespace omm::io {

// Little-endian host assumed; archives are not portable to big-endian machines.
class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& os) : os_(os) {}

  template <typename T>
    requires std::is_arithmetic_v<T>
  void put(T v) {
    os_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }

  void put(const std::string& s) {
    put<std::uint64_t>(s.size());
    os_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }

  template <typename T>
    requires std::is_arithmetic_v<T>
  void put(const std::vector<T>& v) {
    put<std::uint64_t>(v.size());
    os_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
  }

  void put(const std::vector<std::string>& v) {
    put<std::uint64_t>(v.size());
    for (const auto& s : v) put(s);
  }

  void put(const Matrix& m) {
    put<std::int64_t>(m.rows());
    put<std::int64_t>(m.cols());
    os_.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
  }

  void put(const Vector& v) {
    put<std::int64_t>(v.size());
    os_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  }

 private:
  std::ostream& os_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::istream& is) : is_(is) {}

  template <typename T>
    requires std::is_arithmetic_v<T>
  T get() {
    T v{};
    read(&v, sizeof(T));
    return v;
  }

  std::string get_string() {
    std::string s(checked_size(get<std::uint64_t>()), '\0');
    read(s.data(), s.size());
    return s;
  }

  template <typename T>
  std::vector<T> get_vector() {
    std::vector<T> v(checked_size(get<std::uint64_t>()));
    read(v.data(), v.size() * sizeof(T));
    return v;
  }

  std::vector<std::string> get_strings() {
    std::vector<std::string> v(checked_size(get<std::uint64_t>()));
    for (auto& s : v) s = get_string();
    return v;
  }

  Matrix get_matrix() {
    const auto rows = get<std::int64_t>();
    const auto cols = get<std::int64_t>();
    if (rows < 0 || cols < 0) throw DataError("corrupt archive: negative matrix shape");
    Matrix m(rows, cols);
    read(m.data(), static_cast<std::size_t>(m.size()) * sizeof(double));
    return m;
  }

  Vector get_eigen_vector() {
    const auto n = get<std::int64_t>();
    if (n < 0) throw DataError("corrupt archive: negative vector size");
    Vector v(n);
    read(v.data(), static_cast<std::size_t>(n) * sizeof(double));
    return v;
  }

 private:
  static std::size_t checked_size(std::uint64_t n) {
    if (n > (std::uint64_t{1} << 36)) throw DataError("corrupt archive: implausible length");
    return static_cast<std::size_t>(n);
  }

  void read(void* dst, std::size_t bytes) {
    is_.read(static_cast<char*>(dst), static_cast<std::streamsize>(bytes));
    if (!is_) throw DataError("corrupt archive: unexpected end of file");
  }

  std::istream& is_;
};

}  // namespace omm::io
