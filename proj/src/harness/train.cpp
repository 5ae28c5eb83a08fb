#include "handreg/harness/train.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>

#include "handreg/common/error.hpp"

namespace handreg::harness {

namespace {

void check_finite(const losses::LossReport& report, const char* path) {
  for (int t = 0; t < losses::kNumTerms; ++t) {
    const auto& v = report.values[t];
    HANDREG_THROW_IF(v && !std::isfinite(*v), ErrorCode::NonFiniteLoss,
                     std::string(path) + "." + std::string(losses::kTermNames[t]) + " = " +
                         std::to_string(*v));
  }
}

void write_report(std::ostream& os, const losses::LossReport* report) {
  for (int t = 0; t < losses::kNumTerms; ++t) {
    os << '\t';
    if (report && report->values[t]) {
      os << format_number(*report->values[t]);
    } else {
      os << "NA";
    }
  }
}

}  // namespace

void write_metrics_header(std::ostream& os) {
  os << "step\tepoch\ttotal";
  for (const char* path : {"mono", "stereo"})
    for (auto name : losses::kTermNames) os << '\t' << path << '.' << name;
  os << '\n';
}

void write_metrics_row(std::ostream& os, long long step, int epoch, const BatchLoss& loss) {
  os << step << '\t' << epoch << '\t' << format_number(loss.value);
  write_report(os, &loss.mono);
  write_report(os, loss.stereo ? &*loss.stereo : nullptr);
  os << '\n';
}

Trainer::Trainer(TrainConfig config, const geometry::StereoRig& rig, PreparedSplit train,
                 metadata::NormalizationStats stats)
    : config_((config.validate(), std::move(config))),
      rig_(rig),
      data_(std::move(train)),
      model_{std::make_unique<regressor::Network>(config_.network), std::move(stats), 0},
      optimizer_(model_.net->parameters(), ad::AdamHyper{config_.learning_rate}) {
  HANDREG_THROW_IF(data_.records.empty(), ErrorCode::EmptyInput, "empty training split");
  HANDREG_THROW_IF(data_.records.front().vertices.rows() != model_.net->hand_template().num_vertices(),
                   ErrorCode::InvalidConfig,
                   "dataset meshes do not match the network's hand template");
  for (const auto& v : data_.views)
    HANDREG_THROW_IF(v.crop.size() != static_cast<std::size_t>(config_.network.crop_size *
                                                               config_.network.crop_size),
                     ErrorCode::InvalidConfig,
                     "dataset crop size differs from net.crop_size = " +
                         std::to_string(config_.network.crop_size));
}

BatchLoss Trainer::step(std::span<const std::size_t> records) {
  Graph g;
  BatchLoss loss = batch_loss(g, *model_.net, data_, rig_, records, config_.weights,
                              config_.stereo_mode);
  check_finite(loss.mono, "mono");
  if (loss.stereo) check_finite(*loss.stereo, "stereo");
  HANDREG_THROW_IF(!std::isfinite(loss.value), ErrorCode::NonFiniteLoss, "total loss");
  g.backward(loss.total);
  optimizer_.step();
  ++model_.steps;
  return loss;
}

void Trainer::run(std::ostream* metrics, std::ostream* progress) {
  if (metrics) write_metrics_header(*metrics);
  Rng rng(splitmix64(config_.seed ^ 0x7261696eULL));
  std::vector<std::size_t> order(data_.records.size());
  const auto start = std::chrono::steady_clock::now();
  const auto batch = static_cast<std::size_t>(config_.batch_size);
  const std::size_t per_epoch = (order.size() + batch - 1) / batch;
  for (int epoch = 0; epoch < config_.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    for (std::size_t b = 0; b < per_epoch; ++b) {
      if (config_.max_steps > 0 && model_.steps >= config_.max_steps) return;
      const auto part = std::span(order).subspan(b * batch, std::min(batch, order.size() - b * batch));
      const long long step_index = model_.steps;
      const BatchLoss loss = step(part);
      if (metrics && step_index % config_.log_every == 0)
        write_metrics_row(*metrics, step_index, epoch, loss);
      if (progress && (step_index % 200 == 0)) {
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        *progress << "step " << step_index << " epoch " << epoch << " loss " << std::setprecision(6)
                  << loss.value << " (" << std::fixed << std::setprecision(1) << secs << " s)\n"
                  << std::defaultfloat;
      }
    }
  }
}

Model train_from_dataset(TrainConfig config, const std::filesystem::path& data_dir,
                         std::ostream* metrics, std::ostream* progress) {
  const Corpus corpus = open_corpus(data_dir);
  config.network.template_seed = corpus.manifest.config.template_seed;
  config.network.vertex_budget = corpus.manifest.config.vertex_budget;
  HANDREG_THROW_IF(corpus.manifest.config.crop_size != config.network.crop_size,
                   ErrorCode::InvalidConfig,
                   "dataset crop size " + std::to_string(corpus.manifest.config.crop_size) +
                       " differs from net.crop_size " + std::to_string(config.network.crop_size));
  auto records = corpus.load(synth::Split::Train);
  auto stats = fit_stats(records);
  Trainer trainer(config, corpus.rig, prepare_split(std::move(records), corpus.rig, stats), stats);
  trainer.run(metrics, progress);
  return std::move(trainer.model());
}

}  // namespace handreg::harness
