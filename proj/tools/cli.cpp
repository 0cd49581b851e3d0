// Copyright 2026 The rm3d Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rm3d/core/error.hpp"
#include "rm3d/core/parallel.hpp"
#include "rm3d/core/rm3d_format.hpp"
#include "rm3d/core/text.hpp"
#include "rm3d/dataset/dataset.hpp"
#include "rm3d/dataset/heatmap.hpp"
#include "rm3d/dataset/volume.hpp"
#include "rm3d/diffusion/denoiser.hpp"
#include "rm3d/diffusion/sampler.hpp"
#include "rm3d/diffusion/unet.hpp"
#include "rm3d/metrics/metrics.hpp"
#include "rm3d/propagation/solver.hpp"
#include "rm3d/sampling/sampling.hpp"
#include "rm3d/scene/scene.hpp"

namespace rm3d::cli {
namespace {

namespace fs = std::filesystem;

class AssertionFailure : public Error {
 public:
  using Error::Error;
};

struct Globals {
  std::string config;
  bool print_config = false;
  std::size_t threads = 0;
};

struct MaterialFlags {
  double diffraction = 8.0;
  double transmission = 20.0;
  double reflection = 9.0;

  propagation::MaterialParams params() const { return {diffraction, transmission, reflection}; }
};

struct SceneCmd {
  std::string out;
  std::uint64_t seed = 0;
  std::size_t nx = 256;
  std::size_t ny = 256;
  std::size_t nz = 20;
  double resolution = 1.0;
  long long buildings = -1;
  std::size_t min_buildings = 40;
  std::size_t max_buildings = 80;
  double min_footprint = 8.0;
  double max_footprint = 30.0;
  double street_margin = 4.0;
  double min_height = scene::kDefaultMinBuildingHeight;
  double max_height = scene::kDefaultMaxBuildingHeight;
  std::size_t tx = 200;
  double tx_height = scene::kDefaultTxHeight;
  bool force = false;
};

struct SolveCmd {
  std::string scene;
  std::string transmitters;
  std::size_t tx_index = 0;
  std::string out;
  bool normalize = false;
  std::string thresholds;
  std::string rays;
  MaterialFlags material;
  bool force = false;
};

struct ExportCmd {
  std::string scene;
  std::string transmitters;
  std::uint64_t bid = 0;
  std::string out;
  std::size_t tx_count = 0;
  std::string thresholds;
  double split = 0.0;
  std::uint64_t seed = 0;
  bool rays = false;
  MaterialFlags material;
  bool force = false;
};

struct SplitCmd {
  std::string manifest;
  double ratio = 0.9;
  std::uint64_t seed = 0;
  std::string out;
};

struct MaskCmd {
  std::string out;
  std::string kind = "uniform";
  double rate = 0.1;
  std::uint64_t seed = 0;
  std::size_t nx = 256;
  std::size_t ny = 256;
  std::size_t nz = 20;
  std::string volume;
  std::string observations;
  std::string interp;
};

struct EvalCmd {
  std::string pred;
  std::string truth;
  std::string out;
  bool exclude_buildings = false;
  std::size_t ssim_window = 11;
  double ssim_sigma = 1.5;
  double ssim_k1 = 0.01;
  double ssim_k2 = 0.03;
  double dynamic_range = 1.0;
  std::vector<std::string> asserts;
};

struct DiffuseCmd {
  std::string out;
  std::string sampler = "ddim";
  std::size_t steps = 50;
  double eta = 0.0;
  std::uint64_t seed = 0;
  std::size_t T = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  std::string variance = "beta";
  std::string descriptor;
  std::string weights;
  double mu = 0.5;
  double sigma = 0.3;
  std::size_t channels = 1;
  std::size_t nx = 64;
  std::size_t ny = 64;
  std::size_t nz = 4;
  std::string cond;
  std::string guide_target;
  std::string guide_mask;
  double guide_lambda = 0.1;
  double guide_fraction = 0.25;
  std::size_t slabs = 1;
  std::vector<std::size_t> heatmap_layers;
  std::size_t heatmap_channel = 0;
  bool force = false;
};

struct Commands {
  Globals globals;
  SceneCmd scene;
  SolveCmd solve;
  ExportCmd exp;
  SplitCmd split;
  MaskCmd mask;
  EvalCmd eval;
  DiffuseCmd diffuse;
};

void add_material(CLI::App* sub, MaterialFlags& m) {
  sub->add_option("--diffraction-loss", m.diffraction, "Loss per diffraction bend (dB)");
  sub->add_option("--transmission-loss", m.transmission, "Wall transmission loss (dB)");
  sub->add_option("--reflection-loss", m.reflection, "Reflection loss (dB)");
}

std::unique_ptr<CLI::App> build_app(Commands& c) {
  auto app = std::make_unique<CLI::App>("Voxel radio-map generation, datasets and diffusion sampling", "rm3d");
  app->option_defaults()->always_capture_default();
  app->require_subcommand(0, 1);
  app->fallthrough();
  app->add_option("--config", c.globals.config, "Flat key=value file; command-line flags take precedence");
  app->add_flag("--print-config", c.globals.print_config,
                "Print the resolved key=value configuration of the command and exit");
  app->add_option("--threads", c.globals.threads, "Worker cap (0: RM3D_THREADS, else all cores)");

  auto* scene = app->add_subcommand("scene", "Generate a voxel scene and transmitter list");
  auto& s = c.scene;
  scene->add_option("--out", s.out, "Output directory (scene.rm3d, transmitters.csv, height.png, run.cfg)");
  scene->add_option("--seed", s.seed, "Scene and transmitter seed");
  scene->add_option("--nx", s.nx, "Cells along x");
  scene->add_option("--ny", s.ny, "Cells along y");
  scene->add_option("--nz", s.nz, "Height layers");
  scene->add_option("--resolution", s.resolution, "Voxel edge length (m)");
  scene->add_option("--buildings", s.buildings, "Exact building count (-1: draw from the min/max range)");
  scene->add_option("--min-buildings", s.min_buildings, "Smallest drawn building count");
  scene->add_option("--max-buildings", s.max_buildings, "Largest drawn building count");
  scene->add_option("--min-footprint", s.min_footprint, "Smallest footprint side (m)");
  scene->add_option("--max-footprint", s.max_footprint, "Largest footprint side (m)");
  scene->add_option("--street-margin", s.street_margin, "Gap between buildings and to the edge (m)");
  scene->add_option("--min-height", s.min_height, "Lowest building height (m)");
  scene->add_option("--max-height", s.max_height, "Tallest building height (m)");
  scene->add_option("--tx", s.tx, "Number of transmitters");
  scene->add_option("--tx-height", s.tx_height, "Transmitter height (m)");
  scene->add_flag("--force", s.force, "Overwrite existing files");

  auto* solve = app->add_subcommand("solve", "Solve the raw channel volume of one transmitter");
  auto& v = c.solve;
  solve->add_option("--scene", v.scene, "Scene file");
  solve->add_option("--transmitters", v.transmitters, "Transmitter list");
  solve->add_option("--tx-index", v.tx_index, "Zero-based transmitter index");
  solve->add_option("--out", v.out, "Output volume file");
  solve->add_flag("--normalize", v.normalize, "Normalize with the channel thresholds");
  solve->add_option("--thresholds", v.thresholds, "Thresholds file (default: built-in values); implies --normalize");
  solve->add_option("--rays", v.rays, "Write path records of every layer to this file");
  add_material(solve, v.material);
  solve->add_flag("--force", v.force, "Overwrite existing files");

  auto* exp = app->add_subcommand("export", "Solve, normalize and export a scene into a dataset tree");
  auto& e = c.exp;
  exp->add_option("--scene", e.scene, "Scene file");
  exp->add_option("--transmitters", e.transmitters, "Transmitter list");
  exp->add_option("--bid", e.bid, "Building-map id used in sample names");
  exp->add_option("--out", e.out, "Dataset root");
  exp->add_option("--tx-count", e.tx_count, "Export only the first N transmitters (0: all)");
  exp->add_option("--thresholds", e.thresholds, "Thresholds file (default: built-in values)");
  exp->add_option("--split", e.split, "Train fraction for the manifest split (0: no split)");
  exp->add_option("--seed", e.seed, "Split seed");
  exp->add_flag("--rays", e.rays, "Also export propagation_ray records");
  add_material(exp, e.material);
  exp->add_flag("--force", e.force, "Overwrite existing samples");

  auto* split = app->add_subcommand("split", "Assign train/test tags to a manifest");
  auto& p = c.split;
  split->add_option("--manifest", p.manifest, "Manifest file");
  split->add_option("--ratio", p.ratio, "Train fraction");
  split->add_option("--seed", p.seed, "Shuffle seed");
  split->add_option("--out", p.out, "Output manifest (default: rewrite in place)");

  auto* mask = app->add_subcommand("mask", "Build per-layer sample masks");
  auto& m = c.mask;
  mask->add_option("--out", m.out, "Mask file");
  mask->add_option("--kind", m.kind, "uniform or random")->check(CLI::IsMember({"uniform", "random"}));
  mask->add_option("--rate", m.rate, "Sampling rate per layer");
  mask->add_option("--seed", m.seed, "Seed for random masks");
  mask->add_option("--nx", m.nx, "Cells along x (ignored with --volume)");
  mask->add_option("--ny", m.ny, "Cells along y (ignored with --volume)");
  mask->add_option("--nz", m.nz, "Layers (ignored with --volume)");
  mask->add_option("--volume", m.volume, "Volume to sample; fixes the grid");
  mask->add_option("--observations", m.observations, "Write the observed values (needs --volume)");
  mask->add_option("--interp", m.interp, "Write the nearest-neighbor densified volume (needs --volume)");

  auto* eval = app->add_subcommand("eval", "Score a predicted volume against the truth");
  auto& ev = c.eval;
  eval->add_option("--pred", ev.pred, "Predicted volume");
  eval->add_option("--truth", ev.truth, "Ground-truth volume");
  eval->add_option("--out", ev.out, "Report file (the report is always printed)");
  eval->add_flag("--exclude-buildings", ev.exclude_buildings, "Skip voxels inside buildings");
  eval->add_option("--ssim-window", ev.ssim_window, "SSIM window side");
  eval->add_option("--ssim-sigma", ev.ssim_sigma, "SSIM Gaussian sigma");
  eval->add_option("--ssim-k1", ev.ssim_k1, "SSIM K1");
  eval->add_option("--ssim-k2", ev.ssim_k2, "SSIM K2");
  eval->add_option("--dynamic-range", ev.dynamic_range, "Value range L for PSNR and SSIM");
  eval->add_option("--assert", ev.asserts,
                   "Threshold '[channel.]metric OP value', OP one of < <= > >= (repeatable; failure exits 3)");

  auto* diff = app->add_subcommand("diffuse", "Sample volumes with DDPM or DDIM");
  auto& d = c.diffuse;
  diff->add_option("--out", d.out, "Output directory");
  diff->add_option("--sampler", d.sampler, "ddim or ddpm")->check(CLI::IsMember({"ddim", "ddpm"}));
  diff->add_option("--steps", d.steps, "DDIM steps");
  diff->add_option("--eta", d.eta, "DDIM eta");
  diff->add_option("--seed", d.seed, "Noise seed");
  diff->add_option("--T", d.T, "Diffusion steps of the noise schedule");
  diff->add_option("--beta-start", d.beta_start, "First beta of the linear schedule");
  diff->add_option("--beta-end", d.beta_end, "Last beta of the linear schedule");
  diff->add_option("--variance", d.variance, "DDPM variance: beta or posterior")
      ->check(CLI::IsMember({"beta", "posterior"}));
  diff->add_option("--descriptor", d.descriptor, "Denoiser descriptor (default: analytic Gaussian denoiser)");
  diff->add_option("--weights", d.weights, "Denoiser weights");
  diff->add_option("--mu", d.mu, "Analytic denoiser data mean");
  diff->add_option("--sigma", d.sigma, "Analytic denoiser data std");
  diff->add_option("--channels", d.channels, "Analytic denoiser latent channels");
  diff->add_option("--nx", d.nx, "Grid along x when no --cond is given");
  diff->add_option("--ny", d.ny, "Grid along y when no --cond is given");
  diff->add_option("--nz", d.nz, "Layers when no --cond is given");
  diff->add_option("--cond", d.cond, "Condition tensor [Cc, X, Y, Z]");
  diff->add_option("--guide-target", d.guide_target, "Guidance target tensor [C, X, Y, Z]");
  diff->add_option("--guide-mask", d.guide_mask, "Mask file selecting the observed cells");
  diff->add_option("--guide-lambda", d.guide_lambda, "Guidance weight on the tail steps");
  diff->add_option("--guide-fraction", d.guide_fraction, "Fraction of final steps that are guided");
  diff->add_option("--slabs", d.slabs, "Generate autoregressively in this many z slabs");
  diff->add_option("--heatmap-layers", d.heatmap_layers, "Layers rendered as heatmaps (default: all)");
  diff->add_option("--heatmap-channel", d.heatmap_channel, "Channel rendered as heatmaps");
  diff->add_flag("--force", d.force, "Overwrite existing files");
  return app;
}

std::string option_key(const CLI::Option* opt) { return opt->get_single_name(); }

bool is_flag(const CLI::Option* opt) { return opt->get_expected_min() == 0; }

/// key=value lines for every option of the command, prefixed by command=.
std::string config_text(const CLI::App* sub) {
  std::ostringstream os;
  os << "command=" << sub->get_name() << '\n';
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string key = option_key(opt);
    if (key == "help") continue;
    if (is_flag(opt)) {
      os << key << '=' << (opt->count() > 0 && opt->as<bool>() ? "true" : "false") << '\n';
    } else if (opt->count() > 0) {
      for (const std::string& r : opt->results()) os << key << '=' << r << '\n';
    } else if (!opt->get_default_str().empty() && opt->get_items_expected_max() <= 1) {
      os << key << '=' << opt->get_default_str() << '\n';
    }
  }
  return os.str();
}

std::vector<std::pair<std::string, std::string>> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const std::size_t eq = t.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError(path + " line " + std::to_string(lineno) + ": expected key=value");
    }
    entries.emplace_back(std::string(trim(t.substr(0, eq))), std::string(trim(t.substr(eq + 1))));
  }
  return entries;
}

bool parse_bool(const std::string& v, const std::string& where) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ParseError(where + ": expected a boolean, got '" + v + "'");
}

/// Appends config entries not given on the command line. Unknown keys are
/// rejected.
std::vector<std::string> merge_config(const std::vector<std::string>& args, const CLI::App& parsed,
                                      const std::string& path) {
  const auto entries = read_config(path);
  std::string command;
  for (const auto& [key, value] : entries) {
    if (key == "command") command = value;
  }
  std::vector<std::string> merged = args;
  const CLI::App* sub = nullptr;
  if (!parsed.get_subcommands().empty()) {
    sub = parsed.get_subcommands().front();
    if (!command.empty() && command != sub->get_name()) {
      throw ValidationError(path + ": config is for command '" + command + "', not '" + sub->get_name() + "'");
    }
  } else if (!command.empty()) {
    sub = parsed.get_subcommand_no_throw(command);
    if (sub == nullptr) throw ValidationError(path + ": unknown command '" + command + "'");
    merged.push_back(command);
  } else {
    throw ValidationError(path + ": no command given on the command line or as command=");
  }

  std::set<std::string> from_file;
  for (const auto& [key, value] : entries) {
    if (key == "command") continue;
    const std::string where = path + " key '" + key + "'";
    const CLI::Option* opt = sub->get_option_no_throw("--" + key);
    const CLI::App* owner = sub;
    if (opt == nullptr || key == "help") {
      opt = parsed.get_option_no_throw("--" + key);
      owner = &parsed;
      if (opt == nullptr || key == "config" || key == "print-config" || key == "help") {
        throw ValidationError(path + ": unknown key '" + key + "' for command '" + sub->get_name() + "'");
      }
    }
    if (opt->count() > 0 && from_file.count(key) == 0) continue;  // command line wins
    from_file.insert(key);
    if (is_flag(opt)) {
      if (parse_bool(value, where)) merged.push_back("--" + key);
    } else if (owner == &parsed) {
      merged.insert(merged.begin(), "--" + key + "=" + value);
    } else {
      merged.push_back("--" + key + "=" + value);
    }
  }
  return merged;
}

std::size_t resolve_threads(const Globals& g) { return g.threads > 0 ? g.threads : default_threads(); }

void require(const std::string& value, const std::string& flag) {
  if (value.empty()) throw ValidationError(flag + " is required");
}

void refuse_overwrite(const fs::path& path, bool force) {
  if (!force && fs::exists(path)) {
    throw IoError(path.string() + " already exists (use --force to overwrite)");
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw IoError("cannot write " + path.string());
}

// scene ---------------------------------------------------------------------

int cmd_scene(const SceneCmd& c, const std::string& cfg, std::ostream& out) {
  require(c.out, "--out");
  const fs::path dir = c.out;
  for (const char* f : {"scene.rm3d", "transmitters.csv", "height.png"}) refuse_overwrite(dir / f, c.force);
  scene::SceneParams p;
  p.seed = c.seed;
  p.nx = c.nx;
  p.ny = c.ny;
  p.nz = c.nz;
  p.resolution = c.resolution;
  p.min_buildings = c.min_buildings;
  p.max_buildings = c.max_buildings;
  if (c.buildings >= 0) p.min_buildings = p.max_buildings = static_cast<std::size_t>(c.buildings);
  if (c.buildings < -1) throw ValidationError("--buildings must be -1 or a count");
  p.min_footprint = c.min_footprint;
  p.max_footprint = c.max_footprint;
  p.street_margin = c.street_margin;
  p.min_height = c.min_height;
  p.max_height = c.max_height;

  const scene::VoxelScene sc = scene::generate_scene(p);
  const auto txs = scene::place_transmitters(sc, c.tx, c.seed, c.tx_height);
  fs::create_directories(dir);
  scene::save_scene(dir / "scene.rm3d", sc);
  scene::save_transmitters(dir / "transmitters.csv", txs);
  scene::export_height_png(dir / "height.png", sc, c.max_height);
  write_text(dir / "run.cfg", cfg);

  std::size_t occupied = 0;
  for (std::uint8_t o : sc.occupancy().values()) occupied += o;
  out << "scene " << sc.nx() << 'x' << sc.ny() << 'x' << sc.nz() << " occupied_voxels=" << occupied
      << " transmitters=" << txs.size() << '\n';
  return kExitOk;
}

// solve / export --------------------------------------------------------------

std::vector<std::string> ray_text(const propagation::SolveResult& r) {
  std::vector<std::string> layers;
  for (std::size_t k = 0; k < r.volume.nz(); ++k) {
    std::ostringstream os;
    propagation::write_path_records(os, r, k);
    layers.push_back(os.str());
  }
  return layers;
}

int cmd_solve(const SolveCmd& c, std::size_t threads, std::ostream& out) {
  require(c.scene, "--scene");
  require(c.transmitters, "--transmitters");
  require(c.out, "--out");
  refuse_overwrite(c.out, c.force);
  if (!c.rays.empty()) refuse_overwrite(c.rays, c.force);
  const scene::VoxelScene sc = scene::load_scene(c.scene);
  const auto txs = scene::load_transmitters(c.transmitters);
  if (c.tx_index >= txs.size()) {
    throw ValidationError("--tx-index " + std::to_string(c.tx_index) + " out of range (" +
                          std::to_string(txs.size()) + " transmitters)");
  }
  const auto result =
      propagation::solve_volume(sc, txs[c.tx_index], c.material.params(), {threads, !c.rays.empty()});
  dataset::RadioMapVolume vol = result.volume;
  if (c.normalize || !c.thresholds.empty()) {
    const auto thr = c.thresholds.empty() ? dataset::ChannelThresholds::defaults()
                                          : dataset::read_thresholds(c.thresholds);
    vol = dataset::normalize(vol, thr);
  }
  dataset::save_volume(c.out, vol);
  if (!c.rays.empty()) {
    std::string all;
    for (const std::string& layer : ray_text(result)) all += layer;
    write_text(c.rays, all);
  }
  const auto [i, j] = scene::tx_cell(sc, txs[c.tx_index]);
  out << "solved tx " << c.tx_index << " at cell (" << i << ',' << j << ") normalized="
      << (vol.normalized ? "true" : "false") << '\n';
  return kExitOk;
}

int cmd_export(const ExportCmd& c, const std::string& cfg, std::size_t threads, std::ostream& out) {
  require(c.scene, "--scene");
  require(c.transmitters, "--transmitters");
  require(c.out, "--out");
  if (c.split != 0.0 && !(c.split > 0.0 && c.split < 1.0)) throw ValidationError("--split must lie in (0, 1)");
  const fs::path root = c.out;
  const scene::VoxelScene sc = scene::load_scene(c.scene);
  auto txs = scene::load_transmitters(c.transmitters);
  if (c.tx_count > 0 && c.tx_count < txs.size()) txs.resize(c.tx_count);
  const auto thr =
      c.thresholds.empty() ? dataset::ChannelThresholds::defaults() : dataset::read_thresholds(c.thresholds);

  fs::create_directories(root);
  const fs::path thr_path = root / "thresholds.csv";
  if (fs::exists(thr_path) && !c.force && dataset::read_thresholds(thr_path) != thr) {
    throw ValidationError(thr_path.string() + " holds different thresholds; samples would mix normalizations");
  }
  dataset::DatasetManifest manifest;
  const fs::path manifest_path = root / "manifest.csv";
  if (fs::exists(manifest_path)) manifest = dataset::read_manifest(manifest_path);

  // Refuse before solving anything.
  std::vector<dataset::SampleName> names;
  for (const auto& tx : txs) {
    const auto [i, j] = scene::tx_cell(sc, tx);
    names.push_back({c.bid, i, j});
    if (!c.force && fs::exists(dataset::sample_path(root, dataset::Modality::PathLoss, 1, names.back()))) {
      throw IoError("sample " + dataset::sample_stem(names.back()) + " already exists in " + root.string() +
                    " (use --force to overwrite)");
    }
  }
  dataset::write_thresholds(thr_path, thr);

  for (std::size_t n = 0; n < txs.size(); ++n) {
    const auto result = propagation::solve_volume(sc, txs[n], c.material.params(), {threads, c.rays});
    const auto vol = dataset::normalize(result.volume, thr);
    std::vector<std::string> rays;
    dataset::ExportOptions opts;
    opts.force = c.force;
    if (c.rays) {
      rays = ray_text(result);
      opts.ray_records = &rays;
    }
    const auto record = dataset::export_sample(root, names[n], vol, opts);
    auto& recs = manifest.records;
    recs.erase(std::remove_if(recs.begin(), recs.end(), [&](const auto& r) { return r.name == record.name; }),
               recs.end());
    recs.push_back(record);
  }
  if (c.split > 0.0) manifest = dataset::split_dataset(manifest, c.split, c.seed);
  dataset::write_manifest(manifest_path, manifest);
  write_text(root / "run.cfg", cfg);
  out << "exported " << txs.size() << " samples; manifest holds " << manifest.records.size()
      << " (train=" << manifest.count(dataset::Split::Train) << " test=" << manifest.count(dataset::Split::Test)
      << ")\n";
  return kExitOk;
}

int cmd_split(const SplitCmd& c, std::ostream& out) {
  require(c.manifest, "--manifest");
  const auto m = dataset::split_dataset(dataset::read_manifest(c.manifest), c.ratio, c.seed);
  dataset::write_manifest(c.out.empty() ? c.manifest : c.out, m);
  out << "train=" << m.count(dataset::Split::Train) << " test=" << m.count(dataset::Split::Test) << '\n';
  return kExitOk;
}

// mask ------------------------------------------------------------------------

int cmd_mask(const MaskCmd& c, std::ostream& out) {
  require(c.out, "--out");
  if ((!c.observations.empty() || !c.interp.empty()) && c.volume.empty()) {
    throw ValidationError("--observations and --interp need --volume");
  }
  std::optional<dataset::RadioMapVolume> vol;
  std::size_t nx = c.nx, ny = c.ny, nz = c.nz;
  if (!c.volume.empty()) {
    vol = dataset::load_volume(c.volume);
    nx = vol->nx();
    ny = vol->ny();
    nz = vol->nz();
  }
  const sampling::SampleMask mask = c.kind == "uniform" ? sampling::uniform_mask(nx, ny, nz, c.rate)
                                                        : sampling::random_mask(nx, ny, nz, c.rate, c.seed);
  sampling::write_mask(c.out, mask);
  if (vol) {
    const auto masked = sampling::apply_mask(*vol, mask);
    if (!c.observations.empty()) sampling::write_observations(c.observations, masked.observations);
    if (!c.interp.empty()) {
      dataset::RadioMapVolume dense;
      dense.data = sampling::interp_nearest(masked.observations);
      dense.building_mask = vol->building_mask;
      dense.normalized = vol->normalized;
      dataset::save_volume(c.interp, dense);
    }
  }
  std::size_t total = 0;
  for (const auto& layer : mask.layers) total += layer.size();
  out << "points_per_layer=" << (mask.layers.empty() ? 0 : mask.layers.front().size()) << " layers=" << nz
      << " total=" << total << '\n';
  return kExitOk;
}

// eval ------------------------------------------------------------------------

struct Assertion {
  std::string channel = "aggregate";
  std::string metric;
  std::string op;
  double value = 0.0;
  std::string text;
};

Assertion parse_assertion(const std::string& text) {
  Assertion a;
  a.text = text;
  std::size_t pos = text.find_first_of("<>");
  if (pos == std::string::npos) throw ValidationError("--assert '" + text + "': expected one of < <= > >=");
  a.op = text.substr(pos, (pos + 1 < text.size() && text[pos + 1] == '=') ? 2 : 1);
  const std::string lhs(trim(std::string_view(text).substr(0, pos)));
  a.value = parse_double(trim(std::string_view(text).substr(pos + a.op.size())));
  const std::size_t dot = lhs.find('.');
  if (dot != std::string::npos) {
    a.channel = lhs.substr(0, dot);
    a.metric = lhs.substr(dot + 1);
  } else {
    a.metric = lhs;
  }
  return a;
}

bool check_assertion(const Assertion& a, const metrics::MetricReport& report) {
  const metrics::ChannelMetrics* m = nullptr;
  if (a.channel == "aggregate") {
    m = &report.aggregate;
  } else {
    for (dataset::Channel ch : dataset::kChannels) {
      if (dataset::channel_name(ch) == a.channel) m = &report[ch];
    }
  }
  if (m == nullptr) throw ValidationError("--assert '" + a.text + "': unknown channel '" + a.channel + "'");
  double v = 0.0;
  try {
    v = metrics::metric_value(*m, a.metric);
  } catch (const Error&) {
    throw ValidationError("--assert '" + a.text + "': unknown metric '" + a.metric + "'");
  }
  if (a.op == "<") return v < a.value;
  if (a.op == "<=") return v <= a.value;
  if (a.op == ">") return v > a.value;
  return v >= a.value;
}

int cmd_eval(const EvalCmd& c, std::size_t threads, std::ostream& out, std::ostream& err) {
  require(c.pred, "--pred");
  require(c.truth, "--truth");
  std::vector<Assertion> asserts;
  for (const auto& s : c.asserts) asserts.push_back(parse_assertion(s));
  metrics::EvalConfig cfg;
  cfg.ssim.window = c.ssim_window;
  cfg.ssim.sigma = c.ssim_sigma;
  cfg.ssim.k1 = c.ssim_k1;
  cfg.ssim.k2 = c.ssim_k2;
  cfg.ssim.dynamic_range = c.dynamic_range;
  cfg.exclude_buildings = c.exclude_buildings;
  cfg.threads = threads;
  const auto report = metrics::evaluate_volume(dataset::load_volume(c.pred), dataset::load_volume(c.truth), cfg);
  metrics::write_report(out, report);
  if (!c.out.empty()) metrics::write_report(c.out, report);
  bool ok = true;
  for (const auto& a : asserts) {
    if (!check_assertion(a, report)) {
      err << "assertion failed: " << a.text << '\n';
      ok = false;
    }
  }
  if (!ok) throw AssertionFailure("metric assertions failed");
  return kExitOk;
}

// diffuse ---------------------------------------------------------------------

Tensor<double> load_any_f64(const std::string& path) {
  const auto records = load_records(path);
  if (records.size() != 1) {
    throw ParseError(path + ": expected a single tensor record, found " + std::to_string(records.size()));
  }
  return to_f64(records.front());
}

void write_heatmaps(const fs::path& dir, const Tensor<double>& sample, const DiffuseCmd& c) {
  const std::size_t C = sample.dim(0), X = sample.dim(1), Y = sample.dim(2), Z = sample.dim(3);
  if (c.heatmap_channel >= C) throw ValidationError("--heatmap-channel out of range");
  std::vector<std::size_t> layers = c.heatmap_layers;
  if (layers.empty()) {
    for (std::size_t z = 0; z < Z; ++z) layers.push_back(z);
  }
  for (std::size_t z : layers) {
    if (z >= Z) throw ValidationError("--heatmap-layers: layer " + std::to_string(z) + " out of range");
    Tensor<double> slice({X, Y});
    for (std::size_t i = 0; i < X; ++i) {
      for (std::size_t j = 0; j < Y; ++j) slice(i, j) = sample(c.heatmap_channel, i, j, z);
    }
    const auto codes = dataset::quantize_slice(slice);
    const std::string stem = "slice_c" + std::to_string(c.heatmap_channel) + "_z" + std::to_string(z);
    dataset::write_heatmap_png(dir / (stem + ".png"), codes);
    dataset::write_heatmap_pgm(dir / (stem + ".pgm"), codes);
  }
}

int cmd_diffuse(const DiffuseCmd& c, const std::string& cfg, std::ostream& out) {
  using namespace diffusion;
  require(c.out, "--out");
  const fs::path dir = c.out;
  refuse_overwrite(dir / "sample.rm3d", c.force);
  if (c.slabs == 0) throw ValidationError("--slabs must be positive");
  if (c.descriptor.empty() != c.weights.empty()) throw ValidationError("--descriptor and --weights go together");

  Tensor<double> cond;
  if (!c.cond.empty()) {
    cond = load_any_f64(c.cond);
    if (cond.rank() != 4) throw ValidationError(c.cond + ": condition must be [Cc, X, Y, Z]");
  } else {
    cond = Tensor<double>({0, c.nx, c.ny, c.nz});
  }
  const std::size_t Z = cond.dim(3);
  if (Z % c.slabs != 0) {
    throw ValidationError("--slabs " + std::to_string(c.slabs) + " does not divide " + std::to_string(Z) +
                          " layers");
  }
  const bool autoregressive = c.slabs > 1;

  std::unique_ptr<Denoiser> denoiser;
  if (!c.descriptor.empty()) {
    denoiser = load_denoiser(c.descriptor, c.weights);
  } else {
    const std::size_t cc = cond.dim(0) + (autoregressive ? c.channels : 0);
    denoiser = analytic_gaussian_denoiser(c.mu, c.sigma, c.channels, cc);
  }

  const NoiseSchedule sched = linear_schedule(c.T, c.beta_start, c.beta_end);
  SamplerConfig sampler;
  sampler.kind = c.sampler == "ddpm" ? SamplerKind::Ddpm : SamplerKind::Ddim;
  sampler.steps = c.steps;
  sampler.eta = c.eta;
  sampler.variance = c.variance == "posterior" ? DdpmVariance::Posterior : DdpmVariance::Beta;
  const std::size_t steps = sampler.kind == SamplerKind::Ddpm ? c.T : c.steps;

  std::optional<GuidanceConfig> guidance;
  if (!c.guide_target.empty()) {
    require(c.guide_mask, "--guide-mask");
    GuidanceConfig g;
    g.target = load_any_f64(c.guide_target);
    const Shape want{denoiser->latent_channels(), cond.dim(1), cond.dim(2), Z};
    if (g.target.shape() != want) {
      throw ValidationError(c.guide_target + ": guidance target shape " + shape_to_string(g.target.shape()) +
                            " does not match the latent " + shape_to_string(want));
    }
    const auto mask = sampling::read_mask(c.guide_mask);
    if (mask.nx != want[1] || mask.ny != want[2] || mask.nz != Z) {
      throw ValidationError(c.guide_mask + ": mask grid does not match the latent");
    }
    g.mask = Tensor<double>(want, 0.0);
    for (std::size_t k = 0; k < Z; ++k) {
      for (std::size_t cell : mask.layers[k]) {
        for (std::size_t ch = 0; ch < want[0]; ++ch) g.mask(ch, cell / want[2], cell % want[2], k) = 1.0;
      }
    }
    g.lambda = tail_guidance_schedule(steps, c.guide_lambda, c.guide_fraction);
    guidance = std::move(g);
  } else if (!c.guide_mask.empty()) {
    throw ValidationError("--guide-mask needs --guide-target");
  }

  const GuidanceConfig* gp = guidance ? &*guidance : nullptr;
  const GenerationReport report =
      autoregressive ? autoregressive_generate(*denoiser, cond, c.slabs, Z / c.slabs, sched, sampler, gp, c.seed)
                     : generate(*denoiser, cond, sched, sampler, gp, c.seed);

  fs::create_directories(dir);
  save_tensor(dir / "sample.rm3d", report.sample);
  std::ostringstream timing;
  timing << "step,time_ms\n";
  for (std::size_t n = 0; n < report.step_ms.size(); ++n) {
    timing << n << ',' << format_double(report.step_ms[n]) << '\n';
  }
  write_text(dir / "timing.csv", timing.str());
  if (!report.guided.empty()) {
    std::ostringstream os;
    os << "step,t,before,after\n";
    for (const auto& g : report.guided) {
      os << g.step << ',' << g.t << ',' << format_double(g.before) << ',' << format_double(g.after) << '\n';
    }
    write_text(dir / "guidance.csv", os.str());
  }
  write_heatmaps(dir, report.sample, c);
  write_text(dir / "run.cfg", cfg);

  out << "sample " << shape_to_string(report.sample.shape()) << " steps=" << report.step_ms.size()
      << " total_ms=" << format_double(report.total_ms) << '\n';
  return kExitOk;
}

int dispatch(Commands& c, const CLI::App& app, const std::string& cfg, std::ostream& out, std::ostream& err) {
  const std::string name = app.get_subcommands().front()->get_name();
  const std::size_t threads = resolve_threads(c.globals);
  if (name == "scene") return cmd_scene(c.scene, cfg, out);
  if (name == "solve") return cmd_solve(c.solve, threads, out);
  if (name == "export") return cmd_export(c.exp, cfg, threads, out);
  if (name == "split") return cmd_split(c.split, out);
  if (name == "mask") return cmd_mask(c.mask, out);
  if (name == "eval") return cmd_eval(c.eval, threads, out, err);
  return cmd_diffuse(c.diffuse, cfg, out);
}

/// When the command comes only from the config file (`command=`), prepend
/// it so that the remaining flags parse as that command's options.
std::vector<std::string> with_config_command(const std::vector<std::string>& args, const CLI::App& app) {
  std::string path;
  for (std::size_t n = 0; n < args.size(); ++n) {
    if (args[n] == "--config" && n + 1 < args.size()) path = args[n + 1];
    if (args[n].rfind("--config=", 0) == 0) path = args[n].substr(9);
  }
  if (path.empty()) return args;
  for (const std::string& a : args) {
    if (app.get_subcommand_no_throw(a) != nullptr) return args;
  }
  for (const auto& [key, value] : read_config(path)) {
    if (key == "command") {
      if (app.get_subcommand_no_throw(value) == nullptr) {
        throw ValidationError(path + ": unknown command '" + value + "'");
      }
      std::vector<std::string> out{value};
      out.insert(out.end(), args.begin(), args.end());
      return out;
    }
  }
  return args;
}

std::vector<std::string> reversed(const std::vector<std::string>& args) {
  return {args.rbegin(), args.rend()};
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  Commands first;
  auto app = build_app(first);
  try {
    const std::vector<std::string> args = with_config_command(raw_args, *app);
    std::vector<std::string> argv = reversed(args);  // CLI11 consumes from the back
    app->parse(argv);
    if (!first.globals.config.empty()) {
      const auto merged = merge_config(args, *app, first.globals.config);
      Commands second;
      auto app2 = build_app(second);
      argv = reversed(merged);
      app2->parse(argv);
      return [&] {
        if (second.globals.print_config) {
          out << config_text(app2->get_subcommands().front());
          return kExitOk;
        }
        return dispatch(second, *app2, config_text(app2->get_subcommands().front()), out, err);
      }();
    }
    if (app->get_subcommands().empty()) {
      out << app->help();
      return kExitValidation;
    }
    const std::string cfg = config_text(app->get_subcommands().front());
    if (first.globals.print_config) {
      out << cfg;
      return kExitOk;
    }
    return dispatch(first, *app, cfg, out, err);
  } catch (const CLI::CallForHelp&) {
    out << app->help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app->help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const AssertionFailure& e) {
    err << "error: " << e.what() << '\n';
    return kExitAssertion;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace rm3d::cli
