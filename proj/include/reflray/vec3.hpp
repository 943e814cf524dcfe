#pragma once

#include <array>
#include <cmath>

#include "reflray/autodiff.hpp"
#include "reflray/common.hpp"

namespace reflray {

template <class T>
struct Vec3 {
  T x{}, y{}, z{};

  Vec3() = default;
  Vec3(T xx, T yy, T zz) : x(xx), y(yy), z(zz) {}

  T& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
  const T& operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
};

using Vec3d = Vec3<double>;

template <class T>
inline Vec3<T> operator+(const Vec3<T>& a, const Vec3<T>& b) {
  return {a.x + b.x, a.y + b.y, a.z + b.z};
}
template <class T>
inline Vec3<T> operator-(const Vec3<T>& a, const Vec3<T>& b) {
  return {a.x - b.x, a.y - b.y, a.z - b.z};
}
template <class T>
inline Vec3<T> operator-(const Vec3<T>& a) {
  return {-a.x, -a.y, -a.z};
}
template <class T, class S>
inline Vec3<T> operator*(const S& s, const Vec3<T>& a) {
  return {s * a.x, s * a.y, s * a.z};
}
template <class T, class S>
inline Vec3<T> operator*(const Vec3<T>& a, const S& s) {
  return {a.x * s, a.y * s, a.z * s};
}
template <class T>
inline Vec3<T>& operator+=(Vec3<T>& a, const Vec3<T>& b) {
  a.x += b.x;
  a.y += b.y;
  a.z += b.z;
  return a;
}

template <class T>
inline T dot(const Vec3<T>& a, const Vec3<T>& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}

inline Vec3d cross(const Vec3d& a, const Vec3d& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z,
          a.x * b.y - a.y * b.x};
}

template <class T>
inline T norm(const Vec3<T>& a) {
  using ad::sqrt;
  return sqrt(dot(a, a));
}

inline double norm2(const Vec3d& a) { return dot(a, a); }

// x / max(||x||, eps); the all-zero vector maps to itself.
template <class T>
inline Vec3<T> normalize_guarded(const Vec3<T>& a, double eps) {
  using ad::max;
  const T n = max(norm(a), T(eps));
  return {a.x / n, a.y / n, a.z / n};
}

inline Vec3d normalized(const Vec3d& a) {
  const double n = norm(a);
  return {a.x / n, a.y / n, a.z / n};
}

template <class T>
inline Vec3<double> value_of(const Vec3<T>& a) {
  using ad::value_of;
  return {value_of(a.x), value_of(a.y), value_of(a.z)};
}

}  // namespace reflray
