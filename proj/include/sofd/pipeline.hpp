#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "sofd/config.hpp"
#include "sofd/consistency.hpp"
#include "sofd/dataio.hpp"
#include "sofd/eval.hpp"
#include "sofd/graph.hpp"
#include "sofd/nnet.hpp"
#include "sofd/openset.hpp"

namespace sofd {

class PipelineError : public std::runtime_error {
 public:
  PipelineError(std::string stage, const std::string& what)
      : std::runtime_error("stage " + stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct RunArtifacts {
  RunConfig config;
  std::string config_hash;
  SplitResult split;  // normalized D_l / D_u with separated ground truth
  Normalizer normalizer;
  SensorGraph graph;
  std::shared_ptr<const LaplacianBundle> laplacian;
  GcnModel m0;  // untrained placeholder under raw_feature_space
  bool m0_trained = false;
  GcnModel m1;
  std::vector<int> d_p;  // indices into D_u
  std::vector<int> d_s;  // subset of d_p
  std::vector<int> predictions;  // 1..K+1 per D_u sample
  DiagnosisReport report;
  std::string report_path;
};

/// Runs the three-stage pipeline end to end and persists every stage output
/// under config.output_dir. Throws PipelineError naming the failing stage;
/// on failure only an error record is left in the output directory.
RunArtifacts run(const RunConfig& config);

/// run() with one ablation switch applied (see RunConfig::variant).
RunArtifacts run_ablation(RunConfig config, const std::string& variant);

/// Fused features of a dataset under a trained model, chunked forward pass.
FusedBatch fused_features(const GcnModel& model, const Eigen::MatrixXd& x,
                          const std::vector<int>& selection);

/// Resolves "all" / "last" / "i,j,..." against the model's fc depth.
std::vector<int> resolve_fused_selection(const std::string& spec, int fc_layers);

}  // namespace sofd
