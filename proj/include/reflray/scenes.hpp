#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "reflray/common.hpp"
#include "reflray/textio.hpp"
#include "reflray/vec3.hpp"

// Analytic sphere-on-plane scenes with Lambertian shading. These provide
// closed-form ground-truth color, depth and surface normals, standing in for
// benchmark datasets at desk scale. Everything here is plain double.

namespace reflray {

struct Sphere {
  Vec3d center{0, 0, 0};
  double radius = 1.0;
  Vec3d albedo{0.8, 0.1, 0.1};
};

struct GroundPlane {
  double height = -1.0;  // plane z = height, normal +z
  Vec3d albedo{0.5, 0.5, 0.5};
};

struct SyntheticScene {
  std::vector<Sphere> spheres;
  std::vector<GroundPlane> planes;
  Vec3d light_dir{0, 0, -1};  // direction light travels, unit length
  double ambient = 0.1;

  void validate() const {
    require(ambient >= 0.0 && ambient <= 1.0, "scene: ambient out of [0,1]");
    require(std::fabs(norm(light_dir) - 1.0) < 1e-9,
            "scene: light_dir must be unit length");
    auto check_albedo = [](const Vec3d& a) {
      for (int c = 0; c < 3; ++c) {
        require(a[c] >= 0.0 && a[c] <= 1.0, "scene: albedo out of [0,1]");
      }
    };
    for (const Sphere& s : spheres) {
      require(s.radius > 0.0, "scene: sphere radius must be positive");
      check_albedo(s.albedo);
    }
    for (const GroundPlane& p : planes) check_albedo(p.albedo);
    // Primitives may touch but not interpenetrate.
    for (std::size_t i = 0; i < spheres.size(); ++i) {
      for (std::size_t j = i + 1; j < spheres.size(); ++j) {
        const double d = norm(spheres[i].center - spheres[j].center);
        require(d >= spheres[i].radius + spheres[j].radius - 1e-9,
                "scene: spheres intersect");
      }
      for (const GroundPlane& p : planes) {
        require(spheres[i].center.z - p.height >= spheres[i].radius - 1e-9,
                "scene: sphere intersects ground plane");
      }
    }
  }
};

struct Hit {
  double t = 0.0;  // in units of the query direction
  Vec3d normal{0, 0, 1};
  Vec3d albedo{0, 0, 0};
};

// Nearest positive-t intersection of o + t d with the scene.
inline std::optional<Hit> intersect(const SyntheticScene& scene,
                                    const Vec3d& o, const Vec3d& d) {
  require(norm2(d) > 0.0, "intersect: direction must be nonzero");
  std::optional<Hit> best;
  const double kTMin = 1e-9;

  for (const Sphere& s : scene.spheres) {
    const Vec3d oc = o - s.center;
    const double a = dot(d, d);
    const double half_b = dot(oc, d);
    const double c = dot(oc, oc) - s.radius * s.radius;
    const double disc = half_b * half_b - a * c;
    if (disc < 0.0) continue;
    const double sq = std::sqrt(disc);
    for (const double t : {(-half_b - sq) / a, (-half_b + sq) / a}) {
      if (t <= kTMin) continue;
      if (best && best->t <= t) continue;
      Hit h;
      h.t = t;
      h.normal = normalized(o + t * d - s.center);
      h.albedo = s.albedo;
      best = h;
      break;  // roots are ordered; the first accepted is the nearer one
    }
  }
  for (const GroundPlane& p : scene.planes) {
    if (d.z == 0.0) continue;  // parallel: miss (in-plane is degenerate)
    const double t = (p.height - o.z) / d.z;
    if (t <= kTMin) continue;
    if (best && best->t <= t) continue;
    Hit h;
    h.t = t;
    h.normal = Vec3d{0, 0, 1};
    h.albedo = p.albedo;
    best = h;
  }
  return best;
}

// Lambertian, view independent: albedo * (ambient + (1-ambient) * max(0, n.l))
inline Vec3d shade(const SyntheticScene& scene, const Hit& hit) {
  const double lambert =
      std::max(0.0, dot(hit.normal, -scene.light_dir));
  const double gain = scene.ambient + (1.0 - scene.ambient) * lambert;
  return {hit.albedo.x * gain, hit.albedo.y * gain, hit.albedo.z * gain};
}

// --------------------------------------------------------------------------
// Pinhole camera. Rotation columns are (right, up, -forward) so the camera
// looks along -z in its own frame; rays carry the unnormalized direction of
// the pixel's viewing frustum (z-depth parameterization).

struct Camera {
  Vec3d right{1, 0, 0}, up{0, 1, 0}, back{0, 0, 1};  // rotation columns
  Vec3d position{0, 0, 0};
  double fov_deg = 40.0;
  int width = 64, height = 64;

  Vec3d to_world(const Vec3d& v) const {
    return v.x * right + v.y * up + v.z * back;
  }

  void validate() const {
    require(std::fabs(norm(right) - 1.0) < 1e-9 &&
                std::fabs(norm(up) - 1.0) < 1e-9 &&
                std::fabs(norm(back) - 1.0) < 1e-9 &&
                std::fabs(dot(right, up)) < 1e-9 &&
                std::fabs(dot(right, back)) < 1e-9 &&
                std::fabs(dot(up, back)) < 1e-9,
            "camera: rotation must be orthonormal");
    require(dot(cross(right, up), back) > 0.0,
            "camera: rotation must have det +1");
    require(fov_deg > 0.0 && fov_deg < 180.0, "camera: fov out of range");
    require(width >= 1 && height >= 1, "camera: empty image");
  }
};

// Unnormalized direction through the center of pixel (row, col).
inline Vec3d pixel_direction(const Camera& cam, int row, int col) {
  const double f =
      (cam.height / 2.0) / std::tan(deg_to_rad(cam.fov_deg) / 2.0);
  const double u = (col + 0.5 - cam.width / 2.0) / f;
  const double v = -(row + 0.5 - cam.height / 2.0) / f;
  return cam.to_world(Vec3d{u, v, -1.0});
}

inline Camera look_at_camera(const Vec3d& position, const Vec3d& target,
                             double fov_deg, int width, int height) {
  Camera cam;
  cam.position = position;
  const Vec3d forward = normalized(target - position);
  Vec3d up_hint{0, 0, 1};
  if (std::fabs(dot(forward, up_hint)) > 1.0 - 1e-9) up_hint = {0, 1, 0};
  cam.right = normalized(cross(forward, up_hint));
  cam.up = cross(cam.right, forward);
  cam.back = -forward;
  cam.fov_deg = fov_deg;
  cam.width = width;
  cam.height = height;
  cam.validate();
  return cam;
}

// n cameras at equal azimuth spacing on a ring, all aimed at look_at.
// azimuth_offset_deg rotates the whole ring (used to interleave held-out
// views between training views).
inline std::vector<Camera> camera_ring(int n, double radius,
                                       double elevation_deg,
                                       const Vec3d& look_at, double fov_deg,
                                       int width, int height,
                                       double azimuth_offset_deg = 0.0) {
  require(n >= 1, "camera_ring: need at least one camera");
  std::vector<Camera> cams;
  cams.reserve(static_cast<std::size_t>(n));
  const double elev = deg_to_rad(elevation_deg);
  for (int i = 0; i < n; ++i) {
    const double az = deg_to_rad(azimuth_offset_deg + 360.0 * i / n);
    const Vec3d pos =
        look_at + radius * Vec3d{std::cos(az) * std::cos(elev),
                                 std::sin(az) * std::cos(elev),
                                 std::sin(elev)};
    cams.push_back(look_at_camera(pos, look_at, fov_deg, width, height));
  }
  return cams;
}

// --------------------------------------------------------------------------
// Ground-truth rendering.

struct GtImages {
  int width = 0, height = 0;
  std::vector<Vec3d> rgb;     // row-major
  std::vector<double> depth;  // world units along the unit ray; 0 on miss
  std::vector<Vec3d> normal;  // unit outward normal; 0 on miss
  std::vector<std::uint8_t> mask;

  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width) +
           static_cast<std::size_t>(col);
  }
};

inline GtImages render_gt(const SyntheticScene& scene, const Camera& cam) {
  cam.validate();
  GtImages img;
  img.width = cam.width;
  img.height = cam.height;
  const std::size_t n = static_cast<std::size_t>(cam.width) *
                        static_cast<std::size_t>(cam.height);
  img.rgb.assign(n, Vec3d{0, 0, 0});
  img.depth.assign(n, 0.0);
  img.normal.assign(n, Vec3d{0, 0, 0});
  img.mask.assign(n, 0);
  for (int r = 0; r < cam.height; ++r) {
    for (int c = 0; c < cam.width; ++c) {
      const Vec3d d = pixel_direction(cam, r, c);
      const std::optional<Hit> hit = intersect(scene, cam.position, d);
      if (!hit) continue;
      const std::size_t i = img.index(r, c);
      img.rgb[i] = shade(scene, *hit);
      img.depth[i] = hit->t * norm(d);
      img.normal[i] = hit->normal;
      img.mask[i] = 1;
    }
  }
  return img;
}

// --------------------------------------------------------------------------
// Camera rig description stored alongside the scene.

struct RigSpec {
  int train = 8;
  int heldout = 4;
  double radius = 4.0;
  double elevation_deg = 30.0;
  double fov_deg = 30.0;
  int width = 64;
  int height = 64;
  Vec3d look_at{0, 0, 0};
};

// Training cameras ring the scene at equal spacing; held-out cameras sit on
// the same ring rotated half a training step, maximizing novelty.
inline std::vector<Camera> rig_train_cameras(const RigSpec& rig) {
  return camera_ring(rig.train, rig.radius, rig.elevation_deg, rig.look_at,
                     rig.fov_deg, rig.width, rig.height);
}
inline std::vector<Camera> rig_heldout_cameras(const RigSpec& rig) {
  return camera_ring(rig.heldout, rig.radius, rig.elevation_deg, rig.look_at,
                     rig.fov_deg, rig.width, rig.height,
                     180.0 / std::max(1, rig.train));
}

struct SceneFile {
  SyntheticScene scene;
  RigSpec rig;
};

inline SceneFile parse_scene_text(const std::string& text,
                                  const std::string& origin) {
  const TextNode root = textio::parse(text, origin);
  TextCursor cur(&root, origin);
  SceneFile out;

  TextCursor sc = cur.block("scene");
  out.scene.ambient = sc.get_double("ambient", 0.1);
  out.scene.light_dir = normalized(sc.get_vec3("light_dir"));
  for (const TextCursor& sp : sc.blocks("sphere")) {
    Sphere s;
    s.center = sp.get_vec3("center");
    s.radius = sp.get_double("radius");
    s.albedo = sp.get_vec3("albedo");
    out.scene.spheres.push_back(s);
  }
  for (const TextCursor& pl : sc.blocks("plane")) {
    GroundPlane p;
    p.height = pl.get_double("height");
    p.albedo = pl.get_vec3("albedo");
    out.scene.planes.push_back(p);
  }

  TextCursor rg = cur.block("rig");
  out.rig.train = rg.get_int("train");
  out.rig.heldout = rg.get_int("heldout", 0);
  out.rig.radius = rg.get_double("radius");
  out.rig.elevation_deg = rg.get_double("elevation_deg");
  out.rig.fov_deg = rg.get_double("fov_deg");
  out.rig.width = rg.get_int("width");
  out.rig.height = rg.get_int("height");
  out.rig.look_at = rg.get_vec3("look_at");

  cur.check_consumed();
  out.scene.validate();
  require(out.rig.train >= 1, "rig: need at least one training camera");
  return out;
}

inline SceneFile load_scene_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scene: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scene_text(buf.str(), path);
}

inline std::string serialize_scene(const SceneFile& sf) {
  std::ostringstream out;
  auto v3 = [](const Vec3d& v) {
    return textio::format_double(v.x) + " " + textio::format_double(v.y) +
           " " + textio::format_double(v.z);
  };
  out << "scene {\n";
  out << "  ambient " << textio::format_double(sf.scene.ambient) << "\n";
  out << "  light_dir " << v3(sf.scene.light_dir) << "\n";
  for (const Sphere& s : sf.scene.spheres) {
    out << "  sphere {\n";
    out << "    center " << v3(s.center) << "\n";
    out << "    radius " << textio::format_double(s.radius) << "\n";
    out << "    albedo " << v3(s.albedo) << "\n";
    out << "  }\n";
  }
  for (const GroundPlane& p : sf.scene.planes) {
    out << "  plane {\n";
    out << "    height " << textio::format_double(p.height) << "\n";
    out << "    albedo " << v3(p.albedo) << "\n";
    out << "  }\n";
  }
  out << "}\n";
  out << "rig {\n";
  out << "  train " << sf.rig.train << "\n";
  out << "  heldout " << sf.rig.heldout << "\n";
  out << "  radius " << textio::format_double(sf.rig.radius) << "\n";
  out << "  elevation_deg " << textio::format_double(sf.rig.elevation_deg)
      << "\n";
  out << "  fov_deg " << textio::format_double(sf.rig.fov_deg) << "\n";
  out << "  width " << sf.rig.width << "\n";
  out << "  height " << sf.rig.height << "\n";
  out << "  look_at " << v3(sf.rig.look_at) << "\n";
  out << "}\n";
  return out.str();
}

// The default desk scene: red unit sphere resting on a gray plane.
inline SceneFile default_scene() {
  SceneFile sf;
  sf.scene.ambient = 0.15;
  sf.scene.light_dir = normalized(Vec3d{-0.35, 0.25, -0.9});
  sf.scene.spheres.push_back(
      Sphere{Vec3d{0, 0, 0}, 1.0, Vec3d{0.8, 0.15, 0.1}});
  sf.scene.planes.push_back(GroundPlane{-1.0, Vec3d{0.45, 0.45, 0.5}});
  sf.scene.validate();
  return sf;
}

}  // namespace reflray
