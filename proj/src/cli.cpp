#include "plucker_rig/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "plucker_rig/actions.hpp"
#include "plucker_rig/error.hpp"
#include "plucker_rig/geometry.hpp"
#include "plucker_rig/schedule.hpp"
#include "plucker_rig/tensorio.hpp"
#include "plucker_rig/toylab.hpp"
#include "plucker_rig/transforms.hpp"

namespace plucker::cli {

unsigned thread_limit_from_env() {
  const char* value = std::getenv("PLUCKER_RIG_THREADS");
  if (value == nullptr || *value == '\0') return 1;
  char* end = nullptr;
  const unsigned long n = std::strtoul(value, &end, 10);
  if (*end != '\0' || n > 1024) return 1;
  return static_cast<unsigned>(n);
}

namespace {

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

std::string fmt(const Vec3& v) { return fmt(v.x()) + " " + fmt(v.y()) + " " + fmt(v.z()); }

CropRect parse_rect(const std::string& text) {
  CropRect rect;
  char tail = 0;
  if (std::sscanf(text.c_str(), "%d,%d,%d,%d%c", &rect.x0, &rect.y0, &rect.w, &rect.h, &tail) != 4) {
    throw CLI::ValidationError("--rect", "expected x0,y0,w,h");
  }
  return rect;
}

void print_intrinsics(std::ostream& out, const Intrinsics& k) {
  out << "intrinsics: fx=" << fmt(k.fx()) << " fy=" << fmt(k.fy()) << " cx=" << fmt(k.cx())
      << " cy=" << fmt(k.cy()) << " skew=" << fmt(k.skew()) << " size=" << k.width() << "x"
      << k.height() << "\n";
}

CamerasReadOptions camera_options(bool repair, std::ostream& err) {
  CamerasReadOptions options;
  options.repair = repair;
  options.log = [&err](const std::string& msg) { err << "warning: " << msg << "\n"; };
  return options;
}

struct GenRaymapArgs {
  std::string cameras, camera_id, out, image;
  double pixel_offset = 0.0;
  bool repair = false;
};

int gen_raymap(const GenRaymapArgs& a, std::ostream& out, std::ostream& err) {
  const CamerasDoc doc = read_cameras(a.cameras, camera_options(a.repair, err));
  const CameraEntry& cam = doc.find(a.camera_id);
  const RayMap rays = ray_map(cam.intrinsics, cam.pose,
                              {.pixel_center_offset = a.pixel_offset,
                               .threads = thread_limit_from_env()});
  std::optional<Image> image;
  if (!a.image.empty()) image = read_ppm(a.image);
  write_raymap(a.out, rays, image);
  out << "wrote " << a.out << ": " << rays.height() << "x" << rays.width() << "x"
      << (image ? 9 : 6) << " camera '" << cam.id << "' center " << fmt(cam.pose.center())
      << "\n";
  return kExitOk;
}

int validate_cmd(const std::string& path, double tolerance, std::ostream& out, std::ostream& err) {
  const RayMapFile file = read_raymap(path);
  const RayCheck check = check_rays(file.rays, tolerance);
  out << path << ": " << file.rays.height() << "x" << file.rays.width() << "x"
      << (file.image ? 9 : 6) << " max|norm-1|=" << fmt(check.max_norm_error)
      << " max|d.m|=" << fmt(check.max_bilinear)
      << " center_residual=" << fmt(check.center_residual) << "\n";
  if (!check.ok) {
    err << "error: validation failed: " << check.message << "\n";
    return kExitFailure;
  }
  out << "ok\n";
  return kExitOk;
}

struct CropArgs {
  std::string rect, in, out, cameras, camera_id, cameras_out;
  double fraction = 0.95;
  std::optional<std::uint64_t> seed;
  bool repair = false;
};

int crop_cmd(const CropArgs& a, std::ostream& out, std::ostream& err) {
  const RayMapFile file = read_raymap(a.in);
  // Without --rect, a random window of --fraction linear size drawn from --seed.
  const CropRect rect = [&] {
    if (!a.rect.empty()) return parse_rect(a.rect);
    Rng rng(*a.seed);
    const auto [h, w] = crop_size_for_fraction(file.rays.height(), file.rays.width(), a.fraction);
    return sample_crop(rng, file.rays.height(), file.rays.width(), h, w);
  }();
  std::optional<Image> image;
  RayMap rays = [&] {
    if (file.image) {
      auto [img, rm] = joint_crop(*file.image, file.rays, rect);
      image = std::move(img);
      return rm;
    }
    return crop_ray_map(file.rays, rect);
  }();
  write_raymap(a.out, rays, image);
  out << "wrote " << a.out << ": " << rays.height() << "x" << rays.width() << "x"
      << (image ? 9 : 6) << "\n";

  if (!a.cameras.empty()) {
    const CamerasDoc doc = read_cameras(a.cameras, camera_options(a.repair, err));
    const CameraEntry& cam = doc.find(a.camera_id);
    if (cam.intrinsics.width() != file.rays.width() ||
        cam.intrinsics.height() != file.rays.height()) {
      throw Error(ErrorCode::kShapeMismatch, "camera '" + cam.id + "' size differs from " + a.in);
    }
    const Intrinsics cropped = crop_intrinsics(cam.intrinsics, rect);
    print_intrinsics(out, cropped);
    if (!a.cameras_out.empty()) {
      write_cameras(a.cameras_out, CamerasDoc{{CameraEntry{cam.id, cropped, cam.pose}}});
    }
  }
  return kExitOk;
}

int schedule_cmd(int episodes, int n, int m, int start, const std::string& out_path,
                 std::ostream& out) {
  const CameraSchedule s = stair_schedule(episodes, n, m, start);
  const std::string doc = format_schedule(s);
  if (out_path.empty()) {
    out << doc;
    return kExitOk;
  }
  write_text_file(out_path, doc);
  out << "schedule n=" << s.n << " m=" << s.m << " pool=" << s.pool_size << "\n";
  for (std::size_t i = 0; i < s.episodes.size(); ++i) {
    out << "episode " << i << ": {";
    for (std::size_t k = 0; k < s.episodes[i].size(); ++k) out << (k ? "," : "") << s.episodes[i][k];
    out << "}\n";
  }
  return kExitOk;
}

int sample_poses_cmd(const std::string& config, int count, std::uint64_t seed,
                     const std::string& out_path, std::ostream& out) {
  if (count < 0) throw CLI::ValidationError("--count", "must be non-negative");
  const PoseSetConfig cfg = parse_pose_set_config(read_text_file(config));
  Rng rng(seed);
  CamerasDoc doc;
  for (int i = 0; i < count; ++i) {
    char id[64];
    std::snprintf(id, sizeof id, "%s_%04d", cfg.id_prefix.c_str(), i);
    doc.cameras.push_back({id, cfg.intrinsics, sample_lookat_pose(rng, cfg.sampler)});
  }
  const std::string text = format_cameras(doc);
  if (out_path.empty()) {
    out << text;
  } else {
    write_text_file(out_path, text);
    out << "wrote " << count << " cameras to " << out_path << "\n";
  }
  return kExitOk;
}

int convert_actions_cmd(const std::string& from, const std::string& to, const std::string& in,
                        const std::string& out_path, const std::string& frame, std::ostream& out) {
  const ActionSpace from_space = parse_action_space(from);
  const ActionSpace to_space = parse_action_space(to);
  const Trajectory traj = parse_trajectory(read_text_file(in));
  const Trajectory converted = convert(traj, from_space, to_space, parse_rotation_frame(frame));
  write_text_file(out_path, format_trajectory(converted));
  const std::size_t steps =
      std::visit([](const auto& t) { return t.steps.size(); }, converted);
  out << "converted " << steps << " steps " << from << " -> " << to << " (" << frame
      << " frame)\n";
  return kExitOk;
}

int recover_center_cmd(const std::string& path, std::ostream& out) {
  const RayMapFile file = read_raymap(path);
  const CenterEstimate est = recover_camera_center(file.rays);
  out << "center " << fmt(est.center) << "\n";
  out << "residual " << fmt(est.residual) << "\n";
  return kExitOk;
}

struct ToyArgs {
  std::string variant, out;
  std::uint64_t seed = 0;
  int epochs = -1;
  long long train_count = -1, val_count = -1;
  double crop_fraction = -1.0;
  bool fixed_cameras = false;
};

int toy_run_cmd(const ToyArgs& a, std::ostream& out) {
  toy::ExperimentConfig cfg;
  if (a.fixed_cameras) cfg.task = toy::ToyTaskConfig::fixed_cameras();
  if (a.crop_fraction > 0.0) cfg.task.crop_fraction = a.crop_fraction;
  if (a.epochs >= 0) cfg.train.epochs = a.epochs;
  if (a.train_count > 0) cfg.train_count = static_cast<std::size_t>(a.train_count);
  if (a.val_count > 0) cfg.validation_count = static_cast<std::size_t>(a.val_count);
  const toy::ExperimentResult r =
      toy::run_experiment(toy::parse_conditioning(a.variant), a.seed, cfg);
  write_text_file(a.out, toy::format_report(r));
  out << "variant " << a.variant << " seed " << a.seed << ": validation RMSE "
      << fmt(r.validation.rmse) << " m (mean predictor " << fmt(r.mean_predictor.rmse)
      << ", triangulation oracle " << fmt(r.oracle.rmse) << ")\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Plücker ray-map tooling for camera-conditioned policies", "plucker-rig"};
  app.require_subcommand(1);
  std::function<int()> action;

  GenRaymapArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-raymap", "Generate a ray-map file for one camera");
  gen_cmd->add_option("--cameras", gen.cameras, "Cameras document")->required();
  gen_cmd->add_option("--camera-id", gen.camera_id, "Camera id in the document")->required();
  gen_cmd->add_option("--out", gen.out, "Output ray-map file")->required();
  gen_cmd->add_option("--with-image", gen.image, "Binary PPM to pack as 3 extra channels");
  gen_cmd->add_option("--pixel-offset", gen.pixel_offset, "Offset added to pixel indices (0 or 0.5)");
  gen_cmd->add_flag("--repair-rotations", gen.repair, "Orthonormalize slightly invalid rotations");
  gen_cmd->callback([&] { action = [&] { return gen_raymap(gen, out, err); }; });

  std::string validate_path;
  double tolerance = kStorageTolerance;
  auto* val_cmd = app.add_subcommand("validate", "Check a ray-map file's checksum and ray invariants");
  val_cmd->add_option("file", validate_path, "Ray-map file")->required();
  val_cmd->add_option("--tol", tolerance, "Invariant tolerance")->check(CLI::PositiveNumber);
  val_cmd->callback([&] { action = [&] { return validate_cmd(validate_path, tolerance, out, err); }; });

  CropArgs crop;
  auto* crop_sub = app.add_subcommand("crop", "Jointly crop a ray-map file (and its image channels)");
  auto* crop_rect = crop_sub->add_option("--rect", crop.rect, "x0,y0,w,h");
  auto* crop_seed = crop_sub->add_option("--seed", crop.seed, "Random window seed (instead of --rect)")
                        ->excludes(crop_rect);
  crop_sub->add_option("--fraction", crop.fraction, "Random window linear size (default 0.95)")
      ->needs(crop_seed)
      ->check(CLI::Range(0.0, 1.0));
  crop_sub->add_option("in", crop.in, "Input ray-map file")->required();
  crop_sub->add_option("out", crop.out, "Output ray-map file")->required();
  auto* crop_cams = crop_sub->add_option("--cameras", crop.cameras, "Cameras document for the source");
  crop_sub->add_option("--camera-id", crop.camera_id, "Camera id")->needs(crop_cams);
  crop_sub->add_option("--cameras-out", crop.cameras_out, "Write the cropped camera here")
      ->needs(crop_cams);
  crop_sub->add_flag("--repair-rotations", crop.repair, "Orthonormalize slightly invalid rotations");
  crop_sub->callback([&] {
    if (crop.rect.empty() && !crop.seed) throw CLI::RequiredError("--rect or --seed");
    if (!crop.cameras.empty() && crop.camera_id.empty()) {
      throw CLI::RequiredError("--camera-id is required with --cameras");
    }
    action = [&] { return crop_cmd(crop, out, err); };
  });

  int episodes = 0, n = 0, m = 0, start = 0;
  std::string schedule_out;
  auto* sched_cmd = app.add_subcommand("schedule", "Emit a stair-pattern camera schedule");
  sched_cmd->add_option("--episodes", episodes, "Number of episodes")->required();
  sched_cmd->add_option("--n", n, "Cameras per episode")->required();
  sched_cmd->add_option("--m", m, "New cameras per episode step")->required();
  sched_cmd->add_option("--start", start, "First camera index");
  sched_cmd->add_option("--out", schedule_out, "Write the schedule document here");
  sched_cmd->callback([&] {
    action = [&] { return schedule_cmd(episodes, n, m, start, schedule_out, out); };
  });

  std::string pose_config, poses_out;
  int count = 0;
  std::uint64_t pose_seed = 0;
  auto* poses_cmd = app.add_subcommand("sample-poses", "Sample look-at cameras into a cameras document");
  poses_cmd->add_option("--config", pose_config, "Sampler config document")->required();
  poses_cmd->add_option("--count", count, "Number of cameras")->required();
  poses_cmd->add_option("--seed", pose_seed, "Random seed")->required();
  poses_cmd->add_option("--out", poses_out, "Write the cameras document here");
  poses_cmd->callback([&] {
    action = [&] { return sample_poses_cmd(pose_config, count, pose_seed, poses_out, out); };
  });

  std::string from, to, traj_in, traj_out, frame = "world";
  auto* conv_cmd = app.add_subcommand("convert-actions", "Convert a trajectory between action spaces");
  const std::vector<std::string> spaces{"abs_ee", "delta_ee", "abs_joint", "delta_joint"};
  conv_cmd->add_option("--from", from, "Source space")->required()->check(CLI::IsMember(spaces));
  conv_cmd->add_option("--to", to, "Target space")->required()->check(CLI::IsMember(spaces));
  conv_cmd->add_option("in", traj_in, "Input trajectory document")->required();
  conv_cmd->add_option("out", traj_out, "Output trajectory document")->required();
  conv_cmd->add_option("--rot-frame", frame, "Rotation delta frame")
      ->check(CLI::IsMember({"world", "ee"}));
  conv_cmd->callback([&] {
    action = [&] { return convert_actions_cmd(from, to, traj_in, traj_out, frame, out); };
  });

  std::string center_path;
  auto* center_cmd = app.add_subcommand("recover-center", "Least-squares camera center of a ray-map file");
  center_cmd->add_option("file", center_path, "Ray-map file")->required();
  center_cmd->callback([&] { action = [&] { return recover_center_cmd(center_path, out); }; });

  ToyArgs toy_args;
  auto* toy_cmd = app.add_subcommand("toy-run", "Train and evaluate one toy-lab variant");
  toy_cmd->add_option("--variant", toy_args.variant, "Conditioning variant")
      ->required()
      ->check(CLI::IsMember({"none", "token", "early", "late"}));
  toy_cmd->add_option("--seed", toy_args.seed, "Random seed")->required();
  toy_cmd->add_option("--out", toy_args.out, "Report file")->required();
  toy_cmd->add_option("--epochs", toy_args.epochs, "Override epoch count");
  toy_cmd->add_option("--train-count", toy_args.train_count, "Override training set size");
  toy_cmd->add_option("--val-count", toy_args.val_count, "Override validation set size");
  toy_cmd->add_option("--crop-fraction", toy_args.crop_fraction,
                      "Random-crop linear size per view (default 0.95, 1 disables)")
      ->check(CLI::Range(1e-3, 1.0));
  toy_cmd->add_flag("--fixed-cameras", toy_args.fixed_cameras, "Pin both cameras (control setting)");
  toy_cmd->callback([&] { action = [&] { return toy_run_cmd(toy_args, out); }; });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    return action();
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace plucker::cli
