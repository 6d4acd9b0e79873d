#include "sofd/pipeline.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "sofd/rng.hpp"

namespace fs = std::filesystem;

namespace sofd {

namespace {

class StageTimer {
 public:
  explicit StageTimer(std::map<std::string, double>& sink) : sink_(sink) {}

  template <typename F>
  auto operator()(const std::string& stage, F&& body) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      if constexpr (std::is_void_v<decltype(body())>) {
        body();
        sink_[stage] = elapsed(t0);
      } else {
        auto value = body();
        sink_[stage] = elapsed(t0);
        return value;
      }
    } catch (const PipelineError&) {
      throw;
    } catch (const std::exception& e) {
      throw PipelineError(stage, e.what());
    }
  }

 private:
  static double elapsed(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  std::map<std::string, double>& sink_;
};

std::vector<Sample> load_csv_pool(const RunConfig& cfg, const CsvSchema& schema) {
  std::string path = cfg.dataset.path;
  if (path.empty()) {
    if (const char* env = std::getenv("SOFD_DATA_DIR")) {
      path = std::string(env) + "/data.csv";
    }
  }
  if (path.empty()) throw std::runtime_error("dataset.path is not set");
  const auto records = load_raw(path, schema);
  const auto labeled = label_conditions(records);
  std::vector<Sample> pool;
  for (const auto& [rec, cond] : labeled) {
    if (cond == Condition::Unassigned) continue;
    if (rec.speed_index != cfg.dataset.speed) continue;
    Sample s;
    s.x = select_variables(rec, schema);
    s.y = static_cast<int>(cond);
    s.speed_index = rec.speed_index;
    s.id = rec.row;
    pool.push_back(std::move(s));
  }
  return pool;
}

std::uint64_t data_seed(const RunConfig& cfg) {
  return cfg.dataset.seed ? cfg.dataset.seed : cfg.seed;
}

std::vector<Sample> synthetic_pool(const RunConfig& cfg) {
  SyntheticSpec spec;
  spec.per_class = cfg.synthetic.per_class;
  spec.cov_scale = cfg.synthetic.cov_scale;
  spec.seed = mix_seed(data_seed(cfg), 0xda7a);
  if (!cfg.synthetic.means.empty()) {
    for (const auto& m : cfg.synthetic.means) {
      spec.means.push_back(Eigen::Map<const Eigen::VectorXd>(m.data(), static_cast<long>(m.size())));
    }
  } else {
    spec.means = axis_means(cfg.synthetic.classes, cfg.synthetic.dim, cfg.synthetic.separation);
  }
  return generate_synthetic(spec);
}

void write_error_record(const std::string& outdir, const std::string& stage,
                        const std::string& what) {
  std::error_code ec;
  fs::create_directories(outdir, ec);
  if (ec) return;
  std::ofstream out(fs::path(outdir) / "error.txt");
  out << "stage: " << stage << "\n" << what << "\n";
}

void write_fused_csv(const FusedBatch& fused, const std::vector<Sample>& samples,
                     const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write fused features: " + path);
  out << "id";
  for (long j = 0; j < fused.z.cols(); ++j) out << ",f" << j;
  out << "\n";
  for (long i = 0; i < fused.z.rows(); ++i) {
    out << samples[static_cast<std::size_t>(i)].id;
    for (long j = 0; j < fused.z.cols(); ++j) out << "," << fused.z(i, j);
    out << "\n";
  }
}

}  // namespace

std::vector<int> resolve_fused_selection(const std::string& spec, int fc_layers) {
  std::vector<int> sel;
  if (spec.empty() || spec == "all") {
    for (int i = 0; i < fc_layers; ++i) sel.push_back(i);
  } else if (spec == "last") {
    sel.push_back(fc_layers - 1);
  } else {
    std::stringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      const int idx = std::stoi(tok);
      if (idx < 0 || idx >= fc_layers) {
        throw std::runtime_error("fused layer index " + tok + " outside 0.." +
                                 std::to_string(fc_layers - 1));
      }
      sel.push_back(idx);
    }
    if (sel.empty()) throw std::runtime_error("empty fused layer selection");
  }
  return sel;
}

FusedBatch fused_features(const GcnModel& model, const Eigen::MatrixXd& x,
                          const std::vector<int>& selection) {
  // Chunked so the conv traces of large datasets are never all alive at once.
  const long chunk = 256;
  FusedBatch all;
  for (long start = 0; start < x.rows(); start += chunk) {
    const long rows = std::min(chunk, x.rows() - start);
    const ForwardTrace tr = forward(model, x.middleRows(start, rows));
    FusedBatch part = fuse(tr, selection);
    if (all.z.size() == 0) {
      all.z.resize(x.rows(), part.z.cols());
      all.widths = part.widths;
    }
    all.z.middleRows(start, rows) = part.z;
  }
  return all;
}

RunArtifacts run(const RunConfig& config) {
  RunArtifacts art;
  art.config = config;
  art.config_hash = config_hash(config);
  const std::string outdir = config.output_dir;
  std::map<std::string, double> timings;
  StageTimer stage(timings);

  try {
    const int K = static_cast<int>(config.dataset.known_classes.size());
    const bool raw_space = config.variant == "raw_feature_space";

    // Stage 0: data.
    stage("data", [&] {
      CsvSchema schema = CsvSchema::defaults();
      if (!config.dataset.schema.empty()) schema = load_schema_file(config.dataset.schema);
      std::vector<Sample> pool =
          config.dataset.synthetic ? synthetic_pool(config) : load_csv_pool(config, schema);

      SplitConfig split_cfg;
      split_cfg.known_classes = config.dataset.known_classes;
      split_cfg.unknown_class = config.dataset.unknown_class;
      split_cfg.per_class = config.dataset.per_class;
      split_cfg.train_frac = config.dataset.train_frac;
      split_cfg.seed = mix_seed(data_seed(config), 0x511);
      art.split = build_split(pool, split_cfg);

      art.normalizer = fit_normalizer(art.split.d_l);
      art.split.d_l = apply_normalizer(art.normalizer, art.split.d_l);
      art.split.d_u = apply_normalizer(art.normalizer, art.split.d_u);
    });

    fs::create_directories(outdir);
    {
      std::ofstream echo(fs::path(outdir) / "config.json");
      echo << config_to_json(config).dump(2) << "\n";
    }

    const Eigen::MatrixXd x_l = art.split.d_l.matrix();
    const Eigen::MatrixXd x_u = art.split.d_u.matrix();
    const std::vector<int> y_l = art.split.d_l.labels();
    const int m = static_cast<int>(x_l.cols());

    // Stage 1: graph + supervised feature learning.
    stage("graph", [&] {
      art.graph = gaussian_weights(pairwise_distances(x_l), config.graph.sigma2,
                                   config.graph.epsilon);
      auto lap = std::make_shared<LaplacianBundle>(
          build_laplacian(art.graph, config.graph.use_weights));
      art.laplacian = lap;
      save_edge_list(art.graph, (fs::path(outdir) / "graph.txt").string());
    });

    if (!raw_space) {
      stage("train_m0", [&] {
        art.m0 = init_model(art.laplacian, m, config.model.cheb_order,
                            config.model.conv_channels, config.fc_hidden_for_speed(), K,
                            mix_seed(config.seed, 0x30));
        TrainConfig tc;
        tc.lr = config.train_m0.lr;
        tc.batch = config.train_m0.batch;
        tc.epochs = config.train_m0.epochs;
        tc.seed = mix_seed(config.seed, 0x31);
        const std::vector<double> history = train(art.m0, x_l, y_l, tc);
        art.m0_trained = true;
        save_model(art.m0, (fs::path(outdir) / "m0_model.txt").string());
        save_loss_history(history, (fs::path(outdir) / "m0_loss.csv").string());
      });
    }

    // Stage 2: reliability subset construction. M0 is frozen from here on.
    std::vector<DiscriminantResult> scores;
    Eigen::MatrixXd feats_u;
    stage("rejection", [&] {
      RejectionConfig rj;
      rj.alpha = config.rejection.alpha;
      rj.lambda_reg = config.rejection.lambda_reg;
      rj.priors = config.rejection.priors;
      rj.literal_boundary = config.rejection.literal_boundary;
      rj.literal_fdist = config.rejection.literal_fdist;

      Eigen::MatrixXd feats_l;
      FusedBatch fused_u;
      if (raw_space) {
        feats_l = x_l;
        fused_u.z = x_u;
        fused_u.widths = {m};
      } else {
        const int fc_layers = static_cast<int>(art.m0.fc_w.size());
        std::vector<int> selection =
            config.variant == "no_fusion"
                ? resolve_fused_selection("last", fc_layers)
                : resolve_fused_selection(config.rejection.fused_layers, fc_layers);
        feats_l = fused_features(art.m0, x_l, selection).z;
        fused_u = fused_features(art.m0, x_u, selection);
      }
      feats_u = fused_u.z;
      write_fused_csv(fused_u, art.split.d_u.samples,
                      (fs::path(outdir) / "fused_features.csv").string());

      const std::vector<ClassGaussian> classes =
          fit_class_gaussians(feats_l, y_l, K, rj);
      scores.reserve(static_cast<std::size_t>(feats_u.rows()));
      for (long i = 0; i < feats_u.rows(); ++i) {
        scores.push_back(score_sample(feats_u.row(i).transpose(), classes, rj));
        if (scores.back().excluded) art.d_p.push_back(static_cast<int>(i));
      }
    });

    stage("consistency", [&] {
      std::vector<int> agreement;
      if (config.variant == "no_consistency") {
        art.d_s = art.d_p;
        agreement.assign(art.d_p.size(), -1);
      } else {
        ConsistencyConfig cc;
        cc.neighbors = config.consistency.neighbors;
        art.d_s = consistent_filter(art.d_p, feats_u, cc, &agreement);
      }
      std::ofstream audit(fs::path(outdir) / "subset_audit.csv");
      audit << "id,score,threshold,n_p,retained\n";
      std::set<int> reliable(art.d_s.begin(), art.d_s.end());
      for (std::size_t i = 0; i < art.d_p.size(); ++i) {
        const int idx = art.d_p[i];
        const auto& r = scores[static_cast<std::size_t>(idx)];
        audit << art.split.d_u.samples[static_cast<std::size_t>(idx)].id << ","
              << r.score << "," << r.threshold << "," << agreement[i] << ","
              << (reliable.count(idx) ? 1 : 0) << "\n";
      }
    });

    // Stage 3: semi-supervised diagnosis with the added unknown output.
    std::vector<std::string> flags;
    stage("train_m1", [&] {
      Eigen::MatrixXd x_train(x_l.rows() + static_cast<long>(art.d_s.size()), m);
      std::vector<int> y_train = y_l;
      x_train.topRows(x_l.rows()) = x_l;
      for (std::size_t i = 0; i < art.d_s.size(); ++i) {
        x_train.row(x_l.rows() + static_cast<long>(i)) = x_u.row(art.d_s[i]);
        y_train.push_back(K + 1);
      }
      if (art.d_s.empty()) {
        flags.push_back("empty_reliable_subset");
        std::cerr << "[sofd] warning: reliable subset is empty; M1 trains on D_l "
                     "alone and its unknown output receives no signal\n";
      }
      art.m1 = init_model(art.laplacian, m, config.model.cheb_order,
                          config.model.conv_channels, config.fc_hidden_for_speed(), K + 1,
                          mix_seed(config.seed, 0x40));
      TrainConfig tc;
      tc.lr = config.train_m1.lr;
      tc.batch = config.train_m1.batch;
      tc.epochs = config.train_m1.epochs;
      tc.seed = mix_seed(config.seed, 0x41);
      const std::vector<double> history = train(art.m1, x_train, y_train, tc);
      save_model(art.m1, (fs::path(outdir) / "m1_model.txt").string());
      save_loss_history(history, (fs::path(outdir) / "m1_loss.csv").string());
    });

    stage("evaluate", [&] {
      art.predictions = predict(art.m1, x_u).first;
      const Eigen::MatrixXi confusion =
          confusion_matrix(art.split.truth, art.predictions, K + 1);
      art.report = report_from_confusion(confusion, K);
      art.report.d_p_size = static_cast<long>(art.d_p.size());
      art.report.d_s_size = static_cast<long>(art.d_s.size());
      art.report.config_hash = art.config_hash;
      art.report.seed = config.seed;
      art.report.speed = config.dataset.synthetic ? 0 : config.dataset.speed;
      art.report.variant = config.variant;
      for (auto& f : flags) art.report.flags.push_back(f);

      std::ofstream pred(fs::path(outdir) / "predictions.csv");
      pred << "id,label\n";
      std::ofstream truth(fs::path(outdir) / "truth.csv");
      truth << "id,label\n";
      for (std::size_t i = 0; i < art.predictions.size(); ++i) {
        const long id = art.split.d_u.samples[i].id;
        pred << id << "," << art.predictions[i] << "\n";
        truth << id << "," << art.split.truth[i] << "\n";
      }
    });

    stage("report", [&] {
      art.report.timings = timings;
      art.report_path = (fs::path(outdir) / "report.json").string();
      write_report(art.report, art.report_path);
      write_confusion_csv(art.report.confusion,
                          (fs::path(outdir) / "confusion.csv").string());
      write_metrics_long_csv(art.report,
                             (fs::path(outdir) / "metrics_long.csv").string());
    });
  } catch (const PipelineError& e) {
    write_error_record(outdir, e.stage(), e.what());
    throw;
  }
  return art;
}

RunArtifacts run_ablation(RunConfig config, const std::string& variant) {
  if (variant != "no_fusion" && variant != "no_consistency" &&
      variant != "raw_feature_space") {
    throw std::invalid_argument("unknown ablation variant '" + variant + "'");
  }
  config.variant = variant;
  return run(config);
}

}  // namespace sofd
