#include "plucker_rig/tensorio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include <json.hpp>

#include "plucker_rig/crc32.hpp"
#include "plucker_rig/error.hpp"

namespace plucker {

using nlohmann::json;

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

void put_f32(std::vector<std::uint8_t>& out, double v) {
  put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

std::uint16_t get_u16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) |
         (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

float get_f32(std::span<const std::uint8_t> b, std::size_t at) {
  return std::bit_cast<float>(get_u32(b, at));
}

[[noreturn]] void corrupt(const std::string& what) { throw Error(ErrorCode::kCorruptFile, what); }

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::kIoFailure, "read failed for " + path.string());
  return bytes;
}

void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIoFailure, "write failed for " + path.string());
}

}  // namespace

std::vector<std::uint8_t> encode_raymap(const RayMap& rays, const std::optional<Image>& image) {
  if (image && (image->height() != rays.height() || image->width() != rays.width() ||
                image->channels() != 3)) {
    throw Error(ErrorCode::kShapeMismatch, "image must be H x W x 3 matching the ray-map");
  }
  const std::uint32_t channels = image ? 9u : 6u;
  const std::size_t payload_size = rays.pixel_count() * channels * 4;

  std::vector<std::uint8_t> out;
  out.reserve(kRayMapHeaderSize + payload_size + 4);
  for (char c : std::string_view("PLKR")) out.push_back(static_cast<std::uint8_t>(c));
  put_u16(out, kRayMapVersion);
  put_u16(out, image ? kFlagImageChannels : 0);
  put_u32(out, static_cast<std::uint32_t>(rays.height()));
  put_u32(out, static_cast<std::uint32_t>(rays.width()));
  put_u32(out, channels);
  out.push_back(0);                      // dtype float32
  out.resize(kRayMapHeaderSize, 0);     // reserved

  const auto ray_data = rays.data();
  for (std::size_t p = 0; p < rays.pixel_count(); ++p) {
    for (int c = 0; c < RayMap::kChannels; ++c) put_f32(out, ray_data[p * RayMap::kChannels + c]);
    if (image) {
      for (int c = 0; c < 3; ++c) put_f32(out, image->data()[p * 3 + c]);
    }
  }
  const auto payload = std::span<const std::uint8_t>(out).subspan(kRayMapHeaderSize);
  put_u32(out, crc32(payload));
  return out;
}

RayMapFile decode_raymap(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kRayMapHeaderSize + 4) corrupt("file shorter than header and checksum");
  if (!std::equal(bytes.begin(), bytes.begin() + 4, "PLKR")) corrupt("bad magic");
  const std::uint16_t version = get_u16(bytes, 4);
  if (version != kRayMapVersion) {
    throw Error(ErrorCode::kUnsupportedVersion, "ray-map version " + std::to_string(version));
  }
  const std::uint16_t flags = get_u16(bytes, 6);
  if (flags & ~kFlagImageChannels) corrupt("unknown flag bits set");
  const std::uint32_t height = get_u32(bytes, 8);
  const std::uint32_t width = get_u32(bytes, 12);
  const std::uint32_t channels = get_u32(bytes, 16);
  const bool has_image = (flags & kFlagImageChannels) != 0;
  if (channels != (has_image ? 9u : 6u)) corrupt("channel count disagrees with flags");
  if (bytes[20] != 0) {
    throw Error(ErrorCode::kUnsupportedVersion, "dtype " + std::to_string(bytes[20]));
  }
  if (std::any_of(bytes.begin() + 21, bytes.begin() + kRayMapHeaderSize,
                  [](std::uint8_t b) { return b != 0; })) {
    corrupt("reserved header bytes are nonzero");
  }
  if (height > 0x7FFFFFFFu || width > 0x7FFFFFFFu) corrupt("dimensions out of range");
  const std::uint64_t payload_size = std::uint64_t{height} * width * channels * 4;
  if (bytes.size() != kRayMapHeaderSize + payload_size + 4) {
    corrupt("file length " + std::to_string(bytes.size()) + " does not match header (expected " +
            std::to_string(kRayMapHeaderSize + payload_size + 4) + ")");
  }
  const auto payload = bytes.subspan(kRayMapHeaderSize, payload_size);
  if (crc32(payload) != get_u32(bytes, kRayMapHeaderSize + payload_size)) {
    corrupt("payload checksum mismatch");
  }

  RayMapFile file{RayMap(static_cast<int>(height), static_cast<int>(width)), std::nullopt};
  if (has_image) file.image.emplace(static_cast<int>(height), static_cast<int>(width), 3);
  auto ray_data = file.rays.data();
  for (std::size_t p = 0; p < file.rays.pixel_count(); ++p) {
    const std::size_t base = p * channels * 4;
    for (int c = 0; c < RayMap::kChannels; ++c) {
      ray_data[p * RayMap::kChannels + c] = get_f32(payload, base + 4 * c);
    }
    if (has_image) {
      for (int c = 0; c < 3; ++c) file.image->data()[p * 3 + c] = get_f32(payload, base + 24 + 4 * c);
    }
  }
  return file;
}

RayCheck check_rays(const RayMap& rays, double tolerance) {
  RayCheck check;
  for (int v = 0; v < rays.height(); ++v) {
    for (int u = 0; u < rays.width(); ++u) {
      const PluckerRay r = rays.ray(u, v);
      if (!r.direction.allFinite() || !r.moment.allFinite()) {
        check.ok = false;
        check.message = "non-finite ray at (" + std::to_string(u) + "," + std::to_string(v) + ")";
        return check;
      }
      check.max_norm_error = std::max(check.max_norm_error, std::abs(r.direction.norm() - 1.0));
      check.max_bilinear = std::max(check.max_bilinear, std::abs(r.direction.dot(r.moment)));
    }
  }
  if (check.max_norm_error > tolerance) {
    check.ok = false;
    check.message = "direction norm error " + std::to_string(check.max_norm_error);
  } else if (check.max_bilinear > tolerance) {
    check.ok = false;
    check.message = "bilinear constraint violated by " + std::to_string(check.max_bilinear);
  } else if (rays.pixel_count() > 1) {
    try {
      check.center_residual = recover_camera_center(rays).residual;
      if (check.center_residual > tolerance) {
        check.ok = false;
        check.message = "moments disagree on a common center, residual " +
                        std::to_string(check.center_residual);
      }
    } catch (const Error& e) {
      // All-parallel bundles (e.g. a single column of identical rays) have no
      // observable center; that is not a violation.
      if (e.code() != ErrorCode::kDegenerateRays) throw;
    }
  }
  return check;
}

void write_raymap(const std::filesystem::path& path, const RayMap& rays,
                  const std::optional<Image>& image) {
  write_bytes(path, encode_raymap(rays, image));
}

RayMapFile read_raymap(const std::filesystem::path& path, const RayMapReadOptions& options) {
  RayMapFile file = decode_raymap(read_bytes(path));
  if (options.validate) {
    const RayCheck check = check_rays(file.rays, options.tolerance);
    if (!check.ok) corrupt("ray invariants violated: " + check.message);
  }
  return file;
}

// --- JSON documents --------------------------------------------------------

namespace {

[[noreturn]] void schema(const std::string& what) { throw Error(ErrorCode::kSchemaError, what); }

json parse_json(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    schema(std::string("malformed JSON: ") + e.what());
  }
}

template <typename Fn>
auto guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    schema(e.what());
  }
}

double number(const json& j, const char* key) {
  const json& v = j.at(key);
  if (!v.is_number()) schema(std::string("'") + key + "' must be a number");
  return v.get<double>();
}

template <std::size_t N>
std::array<double, N> numbers(const json& j, const char* key) {
  const json& v = j.at(key);
  if (!v.is_array() || v.size() != N) {
    schema(std::string("'") + key + "' must be an array of " + std::to_string(N) + " numbers");
  }
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) {
    if (!v[i].is_number()) schema(std::string("'") + key + "' must contain numbers");
    out[i] = v[i].get<double>();
  }
  return out;
}

Vec3 vec3(const json& j, const char* key) {
  const auto a = numbers<3>(j, key);
  return Vec3(a[0], a[1], a[2]);
}

json to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

int positive_int(const json& j, const char* key) {
  const json& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 1 || v.get<long long>() > 0x7FFFFFFF) {
    schema(std::string("'") + key + "' must be a positive integer");
  }
  return v.get<int>();
}

Intrinsics parse_intrinsics(const json& sizes, const json& k) {
  const int width = positive_int(sizes, "width");
  const int height = positive_int(sizes, "height");
  const double skew = k.contains("skew") ? number(k, "skew") : 0.0;
  try {
    return Intrinsics(number(k, "fx"), number(k, "fy"), number(k, "cx"), number(k, "cy"), width,
                      height, skew);
  } catch (const Error& e) {
    schema(e.what());
  }
}

CameraPose parse_pose(const json& ext, const std::string& id, const CamerasReadOptions& options) {
  const auto r = numbers<9>(ext, "rotation");
  Mat3 rotation;
  rotation << r[0], r[1], r[2], r[3], r[4], r[5], r[6], r[7], r[8];
  const Vec3 translation = vec3(ext, "translation");
  if (!rotation.allFinite() || !translation.allFinite()) schema("non-finite extrinsics");

  const double det = rotation.determinant();
  if (!(det > 0.0)) {
    throw Error(ErrorCode::kBadRotation,
                "camera '" + id + "' rotation has det " + std::to_string(det));
  }
  const double error = std::max(CameraPose::orthonormality_error(rotation), std::abs(det - 1.0));
  if (error <= kRotationTolerance) return CameraPose(rotation, translation);
  if (error <= kLoadRotationTolerance) return CameraPose(orthonormalize(rotation), translation);
  if (!options.repair) {
    throw Error(ErrorCode::kBadRotation, "camera '" + id + "' rotation is off orthonormal by " +
                                             std::to_string(error));
  }
  CameraPose pose(orthonormalize(rotation), translation);
  if (options.log) {
    options.log("repaired rotation of camera '" + id + "' (orthonormality error " +
                std::to_string(error) + ")");
  }
  return pose;
}

}  // namespace

const CameraEntry& CamerasDoc::find(std::string_view id) const {
  for (const CameraEntry& cam : cameras) {
    if (cam.id == id) return cam;
  }
  throw Error(ErrorCode::kSchemaError, "no camera with id '" + std::string(id) + "'");
}

CamerasDoc parse_cameras(std::string_view text, const CamerasReadOptions& options) {
  const json root = parse_json(text);
  return guarded([&] {
    if (!root.is_object() || !root.contains("cameras") || !root["cameras"].is_array()) {
      schema("document must be an object with a 'cameras' array");
    }
    CamerasDoc doc;
    std::set<std::string> seen;
    for (const json& cam : root["cameras"]) {
      if (!cam.is_object() || !cam.contains("id") || !cam["id"].is_string()) {
        schema("each camera needs a string 'id'");
      }
      std::string id = cam["id"].get<std::string>();
      if (!seen.insert(id).second) schema("duplicate camera id '" + id + "'");
      Intrinsics intr = parse_intrinsics(cam, cam.at("intrinsics"));
      CameraPose pose = parse_pose(cam.at("extrinsics"), id, options);
      doc.cameras.push_back({std::move(id), intr, pose});
    }
    return doc;
  });
}

std::string format_cameras(const CamerasDoc& doc) {
  json cams = json::array();
  for (const CameraEntry& cam : doc.cameras) {
    const Mat3& r = cam.pose.rotation();
    json rotation = json::array();
    for (int i = 0; i < 3; ++i) {
      for (int k = 0; k < 3; ++k) rotation.push_back(r(i, k));
    }
    const Intrinsics& k = cam.intrinsics;
    cams.push_back({{"id", cam.id},
                    {"width", k.width()},
                    {"height", k.height()},
                    {"intrinsics",
                     {{"fx", k.fx()}, {"fy", k.fy()}, {"cx", k.cx()}, {"cy", k.cy()},
                      {"skew", k.skew()}}},
                    {"extrinsics",
                     {{"rotation", rotation}, {"translation", to_json(cam.pose.translation())}}}});
  }
  return json{{"cameras", cams}}.dump(2) + "\n";
}

CamerasDoc read_cameras(const std::filesystem::path& path, const CamerasReadOptions& options) {
  return parse_cameras(read_text_file(path), options);
}

void write_cameras(const std::filesystem::path& path, const CamerasDoc& doc) {
  write_text_file(path, format_cameras(doc));
}

std::string format_schedule(const CameraSchedule& schedule) {
  return json{{"n", schedule.n},
              {"m", schedule.m},
              {"start_index", schedule.start_index},
              {"pool_size", schedule.pool_size},
              {"episodes", schedule.episodes}}
             .dump() + "\n";
}

CameraSchedule parse_schedule(std::string_view text) {
  const json root = parse_json(text);
  return guarded([&] {
    CameraSchedule s;
    s.n = root.at("n").get<int>();
    s.m = root.at("m").get<int>();
    s.start_index = root.value("start_index", 0);
    s.pool_size = root.at("pool_size").get<int>();
    s.episodes = root.at("episodes").get<std::vector<std::vector<int>>>();
    for (const auto& ep : s.episodes) {
      if (static_cast<int>(ep.size()) != s.n) schema("episode size differs from n");
      for (int idx : ep) {
        if (idx < 0 || idx >= s.pool_size) schema("camera index outside pool");
      }
    }
    return s;
  });
}

PoseSetConfig parse_pose_set_config(std::string_view text) {
  const json root = parse_json(text);
  return guarded([&] {
    if (!root.is_object() || !root.contains("camera")) schema("config needs a 'camera' object");
    PoseSamplerConfig sampler;
    auto range = [&](const char* key, Range& out) {
      if (root.contains(key)) {
        const auto a = numbers<2>(root, key);
        out = {a[0], a[1]};
      }
    };
    if (root.contains("heading_deg")) sampler.heading_deg = number(root, "heading_deg");
    range("azimuth_deg", sampler.azimuth_deg);
    range("elevation_deg", sampler.elevation_deg);
    range("radius_m", sampler.radius_m);
    if (root.contains("target_box")) {
      sampler.target_box.min = vec3(root["target_box"], "min");
      sampler.target_box.max = vec3(root["target_box"], "max");
    }
    if (root.contains("up")) sampler.up = vec3(root, "up");
    if (root.contains("on_degenerate_up")) {
      const std::string policy = root["on_degenerate_up"].get<std::string>();
      if (policy == "fail") {
        sampler.on_degenerate_up = DegenerateUpPolicy::kFail;
      } else if (policy == "resample") {
        sampler.on_degenerate_up = DegenerateUpPolicy::kResample;
      } else {
        schema("on_degenerate_up must be 'fail' or 'resample'");
      }
    }
    try {
      validate(sampler);
    } catch (const Error& e) {
      schema(e.what());
    }
    const json& cam = root["camera"];
    PoseSetConfig cfg{sampler, parse_intrinsics(cam, cam), root.value("id_prefix", "cam")};
    return cfg;
  });
}

// --- trajectories ----------------------------------------------------------

namespace {

Quat parse_quaternion(const json& j) {
  const auto a = numbers<4>(j, "orientation");
  Quat q(a[0], a[1], a[2], a[3]);
  const double norm = q.norm();
  if (!std::isfinite(norm) || norm == 0.0) schema("orientation must be a nonzero quaternion");
  if (std::abs(norm - 1.0) > 1e-12) q.coeffs() /= norm;
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  return q;
}

json ee_step(const Se3Pose& pose) {
  const Quat& q = pose.orientation;
  return {{"position", to_json(pose.position)},
          {"orientation", json::array({q.w(), q.x(), q.y(), q.z()})}};
}

json joint_step(const JointVector& j) { return {{"joints", j.values}}; }

Se3Pose parse_ee_step(const json& j) { return {vec3(j, "position"), parse_quaternion(j)}; }

JointVector parse_joint_step(const json& j) {
  const json& v = j.at("joints");
  if (!v.is_array() || v.empty()) schema("'joints' must be a non-empty array");
  JointVector out;
  for (const json& x : v) {
    if (!x.is_number() || !std::isfinite(x.get<double>())) schema("joint values must be finite");
    out.values.push_back(x.get<double>());
  }
  return out;
}

template <typename Traj, typename StepFn>
json format_steps(const Traj& traj, StepFn step_fn) {
  json root{{"space", std::string(to_string(traj.space))}};
  if (traj.reference) root["reference"] = step_fn(*traj.reference);
  json steps = json::array();
  for (std::size_t i = 0; i < traj.steps.size(); ++i) {
    json s = step_fn(traj.steps[i]);
    if (!traj.gripper.empty()) s["gripper"] = traj.gripper[i];
    steps.push_back(std::move(s));
  }
  root["steps"] = std::move(steps);
  return root;
}

template <typename Traj, typename ParseFn>
Traj parse_steps(const json& root, ActionSpace space, ParseFn parse_fn) {
  Traj traj;
  traj.space = space;
  if (root.contains("reference")) traj.reference = parse_fn(root["reference"]);
  if (is_delta_space(space) && !traj.reference) {
    throw Error(ErrorCode::kMissingReference, "delta trajectory document has no reference");
  }
  const json& steps = root.at("steps");
  if (!steps.is_array()) schema("'steps' must be an array");
  std::size_t with_gripper = 0;
  for (const json& s : steps) {
    traj.steps.push_back(parse_fn(s));
    if (s.contains("gripper")) {
      traj.gripper.push_back(number(s, "gripper"));
      ++with_gripper;
    }
  }
  if (with_gripper != 0 && with_gripper != traj.steps.size()) {
    schema("'gripper' must be present on every step or none");
  }
  return traj;
}

}  // namespace

std::string format_trajectory(const Trajectory& traj) {
  const json root = std::visit(
      [](const auto& t) {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, EeTrajectory>) {
          return format_steps(t, ee_step);
        } else {
          return format_steps(t, joint_step);
        }
      },
      traj);
  return root.dump(2) + "\n";
}

Trajectory parse_trajectory(std::string_view text) {
  const json root = parse_json(text);
  return guarded([&]() -> Trajectory {
    if (!root.is_object() || !root.contains("space")) schema("trajectory needs a 'space'");
    const ActionSpace space = parse_action_space(root["space"].get<std::string>());
    if (is_ee_space(space)) return parse_steps<EeTrajectory>(root, space, parse_ee_step);
    JointTrajectory traj = parse_steps<JointTrajectory>(root, space, parse_joint_step);
    const int dof = traj.reference ? traj.reference->dof()
                                   : (traj.steps.empty() ? 0 : traj.steps.front().dof());
    for (const JointVector& j : traj.steps) {
      if (j.dof() != dof) throw Error(ErrorCode::kDofMismatch, "inconsistent joint count");
    }
    return traj;
  });
}

// --- images and text -------------------------------------------------------

Image read_ppm(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = read_bytes(path);
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&] {
    skip_space();
    long long value = 0;
    std::size_t digits = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos]) && digits < 10) {
      value = value * 10 + (bytes[pos++] - '0');
      ++digits;
    }
    if (digits == 0) corrupt("malformed PPM header in " + path.string());
    return value;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') {
    corrupt(path.string() + " is not a binary PPM (P6)");
  }
  pos = 2;
  const long long width = read_int();
  const long long height = read_int();
  const long long maxval = read_int();
  if (width < 1 || height < 1 || maxval < 1 || maxval > 255) corrupt("unsupported PPM header");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) corrupt("malformed PPM header");
  ++pos;
  const std::size_t count = static_cast<std::size_t>(width) * height * 3;
  if (bytes.size() - pos < count) corrupt("PPM pixel data truncated");
  Image image(static_cast<int>(height), static_cast<int>(width), 3);
  for (std::size_t i = 0; i < count; ++i) {
    image.data()[i] = static_cast<float>(bytes[pos + i]) / static_cast<float>(maxval);
  }
  return image;
}

void write_ppm(const std::filesystem::path& path, const Image& image) {
  if (image.channels() != 3) throw Error(ErrorCode::kShapeMismatch, "PPM needs 3 channels");
  const std::string header =
      "P6\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) + "\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  for (float x : image.data()) {
    bytes.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(x, 0.0f, 1.0f) * 255.0f)));
  }
  write_bytes(path, bytes);
}

std::string read_text_file(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = read_bytes(path);
  return std::string(bytes.begin(), bytes.end());
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  write_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace plucker
