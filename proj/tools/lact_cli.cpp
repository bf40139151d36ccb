// Command-line front end: every subcommand prints its resolved settings as
// key=value lines before doing any work.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lact/lact.hpp"

namespace fs = std::filesystem;
using namespace lact;

namespace {

using Model = CtNet<float>;

void kv(const std::string& k, const std::string& v) { std::cout << k << "=" << v << "\n"; }
void kv(const std::string& k, double v) { kv(k, io::fmt(v)); }
void kv(const std::string& k, std::uint64_t v) { kv(k, std::to_string(v)); }
void kv(const std::string& k, bool v) { kv(k, std::string(v ? "true" : "false")); }

void require_file(const std::string& path) {
  if (!fs::exists(path)) throw io::FileError("missing input file '" + path + "'");
}

io::Container load(const std::string& path) {
  require_file(path);
  return io::read_container(path);
}

Model load_model(const std::string& path) {
  require_file(path);
  return io::load_checkpoint<float>(path);
}

void save(const std::string& path, const io::Container& c) {
  io::write_container(path, c);
  kv("wrote", path);
}

struct GeometryArgs {
  std::size_t views = 180;
  double start = 0.0;
  double step = 1.0;
  std::size_t bins = 93;
  double spacing = 1.0;

  void add(CLI::App* app) {
    app->add_option("--views", views, "number of views")->capture_default_str();
    app->add_option("--angle-start", start, "first view angle in degrees")->capture_default_str();
    app->add_option("--angle-step", step, "view spacing in degrees")->capture_default_str();
    app->add_option("--bins", bins, "detector bins")->capture_default_str();
    app->add_option("--bin-spacing", spacing, "detector bin spacing")->capture_default_str();
  }
  ParallelGeometry make() const {
    const auto g = make_geometry(views, start, step, bins, spacing);
    kv("geometry.n_views", std::uint64_t{g.n_views});
    kv("geometry.angle_start_deg", g.angle_start_deg);
    kv("geometry.angle_step_deg", g.angle_step_deg);
    kv("geometry.n_bins", std::uint64_t{g.n_bins});
    kv("geometry.bin_spacing", g.bin_spacing);
    return g;
  }
};

void print_quality(const std::string& prefix, const QualityReport& q) {
  kv(prefix + "psnr_db", q.psnr_db);
  kv(prefix + "ssim", q.ssim);
  if (q.s_psnr_db) kv(prefix + "s_psnr_db", *q.s_psnr_db);
}

std::vector<TrainSample> synthetic_training_set(std::size_t n, std::uint64_t seed, const ParallelGeometry& g,
                                                std::size_t side, std::size_t limited, const PhantomSpec& spec) {
  return make_train_samples(gen_dataset(n, seed, g, side, side, spec), limited);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Limited-angle CT toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "seed for every random choice")->capture_default_str();

  // phantom ------------------------------------------------------------------
  auto* ph = app.add_subcommand("phantom", "generate phantoms and their full-view sinograms");
  std::size_t ph_count = 1, ph_size = 64, ph_slices = 32;
  std::string ph_dir = ".", ph_config;
  bool ph_bag = false;
  GeometryArgs ph_geo;
  ph->add_option("--count", ph_count, "number of slices (or bags)")->capture_default_str();
  ph->add_option("--size", ph_size, "image side in pixels")->capture_default_str();
  ph->add_option("--out-dir", ph_dir, "output directory")->capture_default_str();
  ph->add_option("--config", ph_config, "phantom spec file (key value lines)");
  ph->add_flag("--bag", ph_bag, "generate 3D bag volumes with label masks");
  ph->add_option("--slices", ph_slices, "slices per bag")->capture_default_str();
  ph_geo.add(ph);

  // project / restrict -------------------------------------------------------
  auto* pj = app.add_subcommand("project", "forward project an image");
  std::string pj_in, pj_out;
  GeometryArgs pj_geo;
  pj->add_option("--image", pj_in, "image container")->required();
  pj->add_option("--out", pj_out, "sinogram container")->required();
  pj_geo.add(pj);

  auto* rs = app.add_subcommand("restrict", "keep a contiguous range of views");
  std::string rs_in, rs_out;
  std::size_t rs_first = 0, rs_last = 89;
  rs->add_option("--sinogram", rs_in, "sinogram container")->required();
  rs->add_option("--first", rs_first, "first kept view")->capture_default_str();
  rs->add_option("--last", rs_last, "last kept view")->capture_default_str();
  rs->add_option("--out", rs_out, "output sinogram")->required();

  // fbp / wls ----------------------------------------------------------------
  auto* fb = app.add_subcommand("fbp", "filtered back projection");
  std::string fb_in, fb_out;
  std::size_t fb_size = 64;
  fb->add_option("--sinogram", fb_in, "sinogram container")->required();
  fb->add_option("--size", fb_size, "image side")->capture_default_str();
  fb->add_option("--out", fb_out, "image container")->required();

  auto* wl = app.add_subcommand("wls", "weighted least squares reconstruction");
  std::string wl_in, wl_out;
  std::size_t wl_size = 64;
  WlsConfig wl_cfg;
  wl->add_option("--sinogram", wl_in, "sinogram container")->required();
  wl->add_option("--size", wl_size, "image side")->capture_default_str();
  wl->add_option("--iters", wl_cfg.max_iters, "iteration cap")->capture_default_str();
  wl->add_option("--tol", wl_cfg.rel_tol, "relative normal-residual tolerance")->capture_default_str();
  wl->add_option("--out", wl_out, "image container")->required();

  // train --------------------------------------------------------------------
  auto* tr = app.add_subcommand("train", "train the network on synthetic phantoms");
  std::size_t tr_samples = 200, tr_size = 64, tr_limited = 90;
  std::string tr_mode = "mse", tr_out, tr_init;
  std::optional<std::size_t> tr_epochs;
  std::optional<double> tr_lr;
  GeometryArgs tr_geo;
  tr->add_option("--samples", tr_samples, "training phantoms")->capture_default_str();
  tr->add_option("--size", tr_size, "image side")->capture_default_str();
  tr->add_option("--limited-views", tr_limited, "views kept as network input")->capture_default_str();
  tr->add_option("--mode", tr_mode, "mse or adversarial")->check(CLI::IsMember({"mse", "adversarial"}));
  tr->add_option("--epochs", tr_epochs, "epochs (default from config)");
  tr->add_option("--lr", tr_lr, "learning rate (default per mode)");
  tr->add_option("--init", tr_init, "warm-start checkpoint");
  tr->add_option("--out", tr_out, "checkpoint path")->required();
  tr_geo.add(tr);

  // complete / confidence ----------------------------------------------------
  auto* cp = app.add_subcommand("complete", "predict, project, splice and reconstruct");
  std::string cp_in, cp_model, cp_method = "wls", cp_prefix = "completion";
  std::size_t cp_full = 180;
  cp->add_option("--sinogram", cp_in, "limited sinogram container")->required();
  cp->add_option("--model", cp_model, "checkpoint")->required();
  cp->add_option("--method", cp_method, "fbp or wls")->check(CLI::IsMember({"fbp", "wls"}))->capture_default_str();
  cp->add_option("--views-full", cp_full, "views of the completed geometry")->capture_default_str();
  cp->add_option("--out-prefix", cp_prefix, "prefix for the three outputs")->capture_default_str();

  auto* cf = app.add_subcommand("confidence", "dropout perturbation confidence score");
  std::string cf_in, cf_model, cf_var;
  std::size_t cf_samples = 20;
  double cf_dropout = 0.05;
  cf->add_option("--sinogram", cf_in, "limited sinogram container")->required();
  cf->add_option("--model", cf_model, "checkpoint")->required();
  cf->add_option("--samples", cf_samples, "perturbed decodes")->capture_default_str();
  cf->add_option("--dropout", cf_dropout, "latent dropout rate")->capture_default_str();
  cf->add_option("--out-variance", cf_var, "variance map container");

  // evaluate -----------------------------------------------------------------
  auto* ev = app.add_subcommand("evaluate", "PSNR, SSIM and S-PSNR of a reconstruction");
  std::string ev_recon, ev_truth, ev_sino;
  ev->add_option("--recon", ev_recon, "reconstruction container")->required();
  ev->add_option("--truth", ev_truth, "ground truth container")->required();
  ev->add_option("--truth-sino", ev_sino, "full-view ground truth sinogram");

  // segment ------------------------------------------------------------------
  auto* sg = app.add_subcommand("segment", "region growing on a volume");
  std::string sg_in, sg_out, sg_truth;
  GrowParams sg_params;
  std::vector<double> sg_sweep;
  sg->add_option("--volume", sg_in, "volume container")->required();
  sg->add_option("--threshold", sg_params.threshold, "admission threshold")->capture_default_str();
  sg->add_option("--min-size", sg_params.min_region_size, "smallest kept region")->capture_default_str();
  sg->add_option("--sweep", sg_sweep, "thresholds to sweep (reports the best against --truth)");
  sg->add_option("--truth", sg_truth, "ground truth labels for Dice");
  sg->add_option("--out", sg_out, "label container");

  // report -------------------------------------------------------------------
  auto* rp = app.add_subcommand("report", "method comparison over held-out phantoms");
  std::string rp_model;
  std::size_t rp_count = 50, rp_limited = 90;
  std::uint64_t rp_data_seed = 999;
  bool rp_per_phantom = false;
  GeometryArgs rp_geo;
  rp->add_option("--model", rp_model, "checkpoint")->required();
  rp->add_option("--count", rp_count, "test phantoms")->capture_default_str();
  rp->add_option("--data-seed", rp_data_seed, "seed of the test phantoms")->capture_default_str();
  rp->add_option("--limited-views", rp_limited, "views kept")->capture_default_str();
  rp->add_flag("--per-phantom", rp_per_phantom, "print one record per phantom");
  rp_geo.add(rp);

  // pgm ----------------------------------------------------------------------
  auto* pg = app.add_subcommand("pgm", "export an image or sinogram as 16-bit PGM");
  std::string pg_in, pg_out;
  std::vector<double> pg_window;
  pg->add_option("--in", pg_in, "image or sinogram container")->required();
  pg->add_option("--out", pg_out, "PGM path")->required();
  pg->add_option("--window", pg_window, "display window min max (default data range)")->expected(2);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    kv("seed", seed);
    if (*ph) {
      kv("command", std::string("phantom"));
      fs::create_directories(ph_dir);
      if (ph_bag) {
        kv("count", std::uint64_t{ph_count});
        kv("size", std::uint64_t{ph_size});
        kv("slices", std::uint64_t{ph_slices});
        for (std::size_t i = 0; i < ph_count; ++i) {
          BagSpec bs;
          bs.seed = derive_seed(seed, i);
          const BagPhantom bag = gen_bag(bs, ph_size, ph_size, ph_slices);
          char name[64];
          std::snprintf(name, sizeof name, "bag_%03zu", i);
          save((fs::path(ph_dir) / (std::string(name) + ".volume.ctt")).string(), io::to_container(bag.volume));
          save((fs::path(ph_dir) / (std::string(name) + ".labels.ctt")).string(), io::to_container(bag.labels));
        }
        return 0;
      }
      PhantomSpec spec;
      if (!ph_config.empty()) {
        require_file(ph_config);
        spec = io::phantom_spec_from_kv(io::parse_kv(io::read_file(ph_config)));
      }
      for (const auto& [k, v] : io::phantom_spec_kv(spec))
        if (k != "seed") kv("phantom." + k, v);
      kv("count", std::uint64_t{ph_count});
      kv("size", std::uint64_t{ph_size});
      const auto g = ph_geo.make();
      const auto data = gen_dataset(ph_count, seed, g, ph_size, ph_size, spec);
      for (std::size_t i = 0; i < data.size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof name, "%03zu", i);
        save((fs::path(ph_dir) / ("image_" + std::string(name) + ".ctt")).string(), io::to_container(data[i].image));
        save((fs::path(ph_dir) / ("sino_" + std::string(name) + ".ctt")).string(),
             io::to_container(data[i].sinogram));
      }
    } else if (*pj) {
      kv("command", std::string("project"));
      const auto g = pj_geo.make();
      save(pj_out, io::to_container(forward_project(io::image_of(load(pj_in)), g)));
    } else if (*rs) {
      kv("command", std::string("restrict"));
      kv("first", std::uint64_t{rs_first});
      kv("last", std::uint64_t{rs_last});
      save(rs_out, io::to_container(restrict_views(io::sinogram_of(load(rs_in)), {rs_first, rs_last})));
    } else if (*fb) {
      kv("command", std::string("fbp"));
      kv("size", std::uint64_t{fb_size});
      save(fb_out, io::to_container(fbp_reconstruct(io::sinogram_of(load(fb_in)), fb_size, fb_size)));
    } else if (*wl) {
      kv("command", std::string("wls"));
      kv("size", std::uint64_t{wl_size});
      kv("max_iters", std::uint64_t{wl_cfg.max_iters});
      kv("rel_tol", wl_cfg.rel_tol);
      const auto r = wls_reconstruct(io::sinogram_of(load(wl_in)), wl_size, wl_size, wl_cfg);
      kv("iterations_used", std::uint64_t{r.iterations_used});
      kv("final_normal_residual", r.residual_history.back());
      save(wl_out, io::to_container(r.image));
    } else if (*tr) {
      kv("command", std::string("train"));
      Model model = tr_init.empty() ? Model(CtNetConfig::desk(), seed) : load_model(tr_init);
      TrainConfig tc = TrainConfig::for_mode(tr_mode == "mse" ? LossMode::mse : LossMode::adversarial);
      if (!tr_init.empty() && model.config().train.mode == tc.mode) tc = model.config().train;
      tc.seed = seed;
      if (tr_epochs) tc.epochs = *tr_epochs;
      if (tr_lr) tc.lr = *tr_lr;
      model.config().train = tc;
      for (const auto& [k, v] : io::config_kv(model.config())) kv(k, v);
      kv("samples", std::uint64_t{tr_samples});
      kv("limited_views", std::uint64_t{tr_limited});
      const auto g = tr_geo.make();
      if (tr_size != model.image_side())
        throw ArgumentError("train: --size " + std::to_string(tr_size) + " does not match the network output side " +
                            std::to_string(model.image_side()));
      const auto data = synthetic_training_set(tr_samples, seed, g, tr_size, tr_limited, PhantomSpec{});
      for (std::size_t e = 0; e < tc.epochs; ++e) {
        const auto m = train_epoch(data, model, tc);
        std::cout << "epoch=" << model.epochs_done << " mean_mse=" << io::fmt(m.mean_mse)
                  << " first_batch_mse=" << io::fmt(m.first_batch_mse) << " mean_total=" << io::fmt(m.mean_total)
                  << " mean_d=" << io::fmt(m.mean_d) << " disc_accuracy=" << io::fmt(m.disc_accuracy)
                  << " grad_norm=" << io::fmt(m.mean_grad_norm) << "\n";
        std::cout.flush();
      }
      io::save_checkpoint(tr_out, model);
      kv("wrote", tr_out);
    } else if (*cp) {
      kv("command", std::string("complete"));
      kv("method", cp_method);
      kv("views_full", std::uint64_t{cp_full});
      Model model = load_model(cp_model);
      const Sinogram lim = io::sinogram_of(load(cp_in));
      ParallelGeometry full = lim.geometry();
      full.n_views = cp_full;
      validate(full);
      const auto r = reconstruct(lim, model, parse_method(cp_method), full);
      save(cp_prefix + ".completed.ctt", io::to_container(r.completed));
      save(cp_prefix + ".predicted.ctt", io::to_container(r.predicted));
      save(cp_prefix + ".final.ctt", io::to_container(r.final_image, {{"method", cp_method}}));
    } else if (*cf) {
      kv("command", std::string("confidence"));
      kv("samples", std::uint64_t{cf_samples});
      kv("dropout", cf_dropout);
      Model model = load_model(cf_model);
      const auto r = confidence(io::sinogram_of(load(cf_in)), model, cf_samples, cf_dropout, seed);
      kv("degenerate", r.degenerate);
      kv("r_k", r.degenerate ? std::string("undefined") : io::fmt(r.score));
      double total = 0.0;
      for (double v : r.variance.values()) total += v;
      kv("variance_sum", total);
      if (!cf_var.empty())
        save(cf_var, io::to_container(r.variance, {{"r_k", io::fmt(r.score)}, {"samples", std::to_string(cf_samples)},
                                                    {"dropout", io::fmt(cf_dropout)}}));
    } else if (*ev) {
      kv("command", std::string("evaluate"));
      const SliceImage recon = io::image_of(load(ev_recon));
      const SliceImage truth = io::image_of(load(ev_truth));
      std::optional<Sinogram> sino;
      if (!ev_sino.empty()) sino = io::sinogram_of(load(ev_sino));
      print_quality("", evaluate_quality(recon, truth, sino ? &*sino : nullptr));
    } else if (*sg) {
      kv("command", std::string("segment"));
      kv("threshold", sg_params.threshold);
      kv("min_region_size", std::uint64_t{sg_params.min_region_size});
      const Volume vol = io::volume_of(load(sg_in));
      std::optional<LabelVolume> truth;
      if (!sg_truth.empty()) truth = io::labels_of(load(sg_truth));
      if (!sg_sweep.empty()) {
        if (!truth) throw ArgumentError("segment: --sweep needs --truth");
        const auto s = threshold_sweep(vol, *truth, sg_sweep, sg_params.min_region_size);
        for (std::size_t i = 0; i < sg_sweep.size(); ++i)
          std::cout << "threshold=" << io::fmt(sg_sweep[i]) << " mean_dice=" << io::fmt(s.mean_dice[i]) << "\n";
        kv("best_threshold", s.best_threshold);
        kv("best_mean_dice", s.best_mean_dice);
        sg_params.threshold = s.best_threshold;
      }
      const LabelVolume labels = region_grow(vol, sg_params);
      kv("regions", std::uint64_t(label_count(labels)));
      if (truth) kv("mean_dice", dice(labels, *truth).mean);
      if (!sg_out.empty()) save(sg_out, io::to_container(labels));
    } else if (*rp) {
      kv("command", std::string("report"));
      kv("count", std::uint64_t{rp_count});
      kv("data_seed", rp_data_seed);
      kv("limited_views", std::uint64_t{rp_limited});
      Model model = load_model(rp_model);
      const auto g = rp_geo.make();
      const std::size_t side = model.image_side();
      const auto test = gen_dataset(rp_count, rp_data_seed, g, side, side);
      ReportOptions opt;
      opt.limited_views = rp_limited;
      opt.seed = seed;
      const auto recs = evaluate_test_set(model, test, opt);
      if (rp_per_phantom)
        for (std::size_t i = 0; i < recs.size(); ++i) {
          const auto& r = recs[i];
          std::cout << "phantom=" << i << " psnr_limited_fbp=" << io::fmt(r.psnr_limited_fbp)
                    << " psnr_limited_wls=" << io::fmt(r.psnr_limited_wls)
                    << " psnr_predicted=" << io::fmt(r.psnr_predicted)
                    << " psnr_completed_fbp=" << io::fmt(r.psnr_completed_fbp)
                    << " psnr_completed_wls=" << io::fmt(r.psnr_completed_wls)
                    << " sino_psnr_zero_filled=" << io::fmt(r.sino_psnr_zero_filled)
                    << " sino_psnr_completed=" << io::fmt(r.sino_psnr_completed)
                    << " confidence=" << io::fmt(r.confidence) << "\n";
        }
      auto mean_kv = [&](const std::string& k, auto f) { kv("mean." + k, mean_of(column(recs, f))); };
      mean_kv("psnr_limited_fbp", [](const auto& r) { return r.psnr_limited_fbp; });
      mean_kv("psnr_limited_wls", [](const auto& r) { return r.psnr_limited_wls; });
      mean_kv("psnr_predicted", [](const auto& r) { return r.psnr_predicted; });
      mean_kv("psnr_completed_fbp", [](const auto& r) { return r.psnr_completed_fbp; });
      mean_kv("psnr_completed_wls", [](const auto& r) { return r.psnr_completed_wls; });
      mean_kv("ssim_limited_fbp", [](const auto& r) { return r.ssim_limited_fbp; });
      mean_kv("ssim_limited_wls", [](const auto& r) { return r.ssim_limited_wls; });
      mean_kv("ssim_predicted", [](const auto& r) { return r.ssim_predicted; });
      mean_kv("ssim_completed_fbp", [](const auto& r) { return r.ssim_completed_fbp; });
      mean_kv("ssim_completed_wls", [](const auto& r) { return r.ssim_completed_wls; });
      mean_kv("s_psnr_limited_fbp", [](const auto& r) { return r.s_psnr_limited_fbp; });
      mean_kv("s_psnr_completed_wls", [](const auto& r) { return r.s_psnr_completed_wls; });
      mean_kv("sino_psnr_zero_filled", [](const auto& r) { return r.sino_psnr_zero_filled; });
      mean_kv("sino_psnr_completed", [](const auto& r) { return r.sino_psnr_completed; });
      const auto s = summarize(recs);
      for (const auto& o : s.orderings)
        std::cout << "ordering=\"" << o.name << "\" mean_a=" << io::fmt(o.mean_a) << " mean_b=" << io::fmt(o.mean_b)
                  << " wins=" << o.test.wins << " losses=" << o.test.losses
                  << " sign_p=" << io::fmt(o.test.p_value) << " holds=" << (o.holds() ? "true" : "false") << "\n";
      kv("confidence.spearman_rho", s.confidence_vs_psnr.rho);
      kv("confidence.p_value", s.confidence_vs_psnr.p_value);
    } else if (*pg) {
      kv("command", std::string("pgm"));
      const io::Container c = load(pg_in);
      const auto kind = io::find_meta(c.meta, "kind").value_or("image");
      const auto vals = io::as_doubles(c);
      const io::Window w = pg_window.size() == 2 ? io::Window{pg_window[0], pg_window[1]} : io::data_window(vals);
      kv("window.lo", w.lo);
      kv("window.hi", w.hi);
      if (kind == "sinogram")
        io::export_pgm(io::sinogram_of(c), pg_out, w);
      else
        io::export_pgm(io::image_of(c), pg_out, w);
      kv("wrote", pg_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
