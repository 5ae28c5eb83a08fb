#include "handreg/harness/evaluate.hpp"

#include <iomanip>
#include <numeric>
#include <json.hpp>
#include <ostream>

#include "handreg/common/error.hpp"
#include "handreg/geometry/stereo.hpp"

namespace handreg::harness {

namespace {

using KeypointErrors = std::array<double, hand::kNumKeypoints>;

KeypointErrors errors_of(const hand::Points& pred, const hand::Points& gt) {
  const auto e = keypoint_errors(pred, gt);
  KeypointErrors out{};
  std::copy(e.begin(), e.end(), out.begin());
  return out;
}

MethodResult reference_row(const std::string& name, double mkpe, double auc) {
  MethodResult r;
  r.name = name;
  r.subset = "externally reported, different dataset";
  r.mkpe = mkpe;
  r.auc = auc;
  r.reference = true;
  return r;
}

}  // namespace

const MethodResult& EvalReport::row(const std::string& name) const {
  for (const auto& r : rows)
    if (r.name == name) return r;
  throw Error(ErrorCode::InvalidArgument, "report has no row '" + name + "'");
}

MethodResult summarize(const std::string& name, const std::string& subset,
                       const std::vector<KeypointErrors>& errors) {
  HANDREG_THROW_IF(errors.empty(), ErrorCode::EmptyInput, "no samples for row '" + name + "'");
  MethodResult r;
  r.name = name;
  r.subset = subset;
  r.samples = errors.size();
  std::vector<double> flat;
  flat.reserve(errors.size() * hand::kNumKeypoints);
  for (const auto& e : errors) {
    for (int k = 0; k < hand::kNumKeypoints; ++k) r.per_keypoint[k] += e[k];
    flat.insert(flat.end(), e.begin(), e.end());
  }
  double sum = 0.0;
  for (auto& v : r.per_keypoint) {
    sum += v;
    v /= static_cast<double>(errors.size());
  }
  r.mkpe = sum / static_cast<double>(flat.size());
  r.pck = pck_curve(flat);
  r.auc = auc_from_curve(r.pck);
  return r;
}

EvalReport evaluate(const Model& model, const geometry::StereoRig& rig, const PreparedSplit& split,
                    const hand::Points& mean, const std::string& split_name) {
  EvalReport rep;
  rep.split = split_name;
  rep.records = split.records.size();
  rep.mono_views = split.views.size();
  const auto stereo = split.stereo_records();
  rep.stereo_records = stereo.size();

  std::vector<std::size_t> all_views(split.views.size());
  std::iota(all_views.begin(), all_views.end(), std::size_t{0});
  const auto mono = predict_mono(*model.net, split, all_views);
  std::vector<KeypointErrors> e_mono, e_mono_mano, e_mono_sub;
  for (std::size_t i = 0; i < mono.size(); ++i) {
    const auto& gt = split.records[split.views[i].record].keypoints3d;
    e_mono.push_back(errors_of(mono[i].keypoints, gt));
    e_mono_mano.push_back(errors_of(mono[i].mano_keypoints, gt));
  }
  for (std::size_t r : stereo)
    for (int v = 0; v < 2; ++v) e_mono_sub.push_back(e_mono[split.view_of[r][v]]);
  rep.rows.push_back(summarize(kMono, "every visible view, mono path", e_mono));
  if (!stereo.empty())
    rep.rows.push_back(
        summarize(kMonoStereoSubset, "both views of two-view records, mono path", e_mono_sub));

  if (!stereo.empty()) {
    const auto st = predict_stereo(*model.net, split, stereo);
    std::vector<KeypointErrors> e_st, e_st_mano, e_tri;
    for (std::size_t i = 0; i < st.size(); ++i) {
      const auto& rec = split.records[stereo[i]];
      e_st.push_back(errors_of(st[i].keypoints, rec.keypoints3d));
      e_st_mano.push_back(errors_of(st[i].mano_keypoints, rec.keypoints3d));
      hand::Points tri(hand::kNumKeypoints, 3);
      for (int k = 0; k < hand::kNumKeypoints; ++k)
        tri.row(k) = geometry::triangulate(rig.left, rig.right,
                                           rec.views[0].keypoints2d.row(k).transpose(),
                                           rec.views[1].keypoints2d.row(k).transpose())
                         .transpose();
      e_tri.push_back(errors_of(tri, rec.keypoints3d));
    }
    rep.rows.push_back(summarize(kStereo, "two-view records, stereo path", e_st));
    rep.rows.push_back(summarize(kMonoMano, "every visible view, parametric mesh keypoints",
                                 e_mono_mano));
    rep.rows.push_back(
        summarize(kStereoMano, "two-view records, parametric mesh keypoints", e_st_mano));
    rep.rows.push_back(
        summarize(kTriangulation, "two-view records, triangulated ground-truth 2D", e_tri));
  } else {
    rep.rows.push_back(summarize(kMonoMano, "every visible view, parametric mesh keypoints",
                                 e_mono_mano));
  }

  std::vector<KeypointErrors> e_mean;
  for (const auto& rec : split.records) e_mean.push_back(errors_of(mean, rec.keypoints3d));
  rep.rows.push_back(summarize(kMeanPose, "every record, training-set mean keypoints", e_mean));

  rep.rows.push_back(reference_row("published_reference_mono", 12.37, 0.755));
  rep.rows.push_back(reference_row("published_reference_stereo", 11.39, 0.774));
  return rep;
}

EvalReport evaluate_dataset(const Model& model, const std::filesystem::path& data_dir,
                            synth::Split split) {
  const Corpus corpus = open_corpus(data_dir);
  const auto train = corpus.load(synth::Split::Train);
  const hand::Points mean = mean_pose(train);
  const auto prepared = prepare_split(corpus.load(split), corpus.rig, model.stats);
  return evaluate(model, corpus.rig, prepared, mean,
                  std::string(synth::kSplitNames[static_cast<int>(split)]));
}

std::string report_to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["split"] = report.split;
  j["records"] = report.records;
  j["stereo_records"] = report.stereo_records;
  j["mono_views"] = report.mono_views;
  std::vector<double> thresholds;
  for (int i = 0; i < kPckSamples; ++i) thresholds.push_back(kAucMaxMm * i / (kPckSamples - 1));
  j["pck_thresholds_mm"] = thresholds;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& r : report.rows) {
    nlohmann::ordered_json row;
    row["name"] = r.name;
    row["subset"] = r.subset;
    row["reference"] = r.reference;
    row["mkpe_mm"] = r.mkpe;
    row["auc"] = r.auc;
    if (!r.reference) {
      row["samples"] = r.samples;
      row["pck"] = r.pck;
      row["per_keypoint_mkpe_mm"] = r.per_keypoint;
    }
    rows.push_back(row);
  }
  j["methods"] = rows;
  return j.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& text) {
  EvalReport rep;
  try {
    const auto j = nlohmann::json::parse(text);
    rep.split = j.at("split").get<std::string>();
    rep.records = j.at("records").get<std::size_t>();
    rep.stereo_records = j.at("stereo_records").get<std::size_t>();
    rep.mono_views = j.at("mono_views").get<std::size_t>();
    for (const auto& row : j.at("methods")) {
      MethodResult r;
      r.name = row.at("name").get<std::string>();
      r.subset = row.at("subset").get<std::string>();
      r.reference = row.at("reference").get<bool>();
      r.mkpe = row.at("mkpe_mm").get<double>();
      r.auc = row.at("auc").get<double>();
      if (!r.reference) {
        r.samples = row.at("samples").get<std::size_t>();
        r.pck = row.at("pck").get<PckCurve>();
        r.per_keypoint = row.at("per_keypoint_mkpe_mm").get<std::array<double, hand::kNumKeypoints>>();
      }
      rep.rows.push_back(r);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Format, std::string("evaluation report: ") + e.what());
  }
  return rep;
}

void write_table(std::ostream& os, const EvalReport& report) {
  os << "split " << report.split << ": " << report.records << " records, "
     << report.stereo_records << " two-view, " << report.mono_views << " views\n";
  os << std::left << std::setw(30) << "method" << std::right << std::setw(12) << "MKPE (mm)"
     << std::setw(16) << "AUC (0-50 mm)" << std::setw(10) << "samples" << '\n';
  const auto flags = os.flags();
  for (const auto& r : report.rows) {
    os << std::left << std::setw(30) << r.name << std::right << std::fixed << std::setprecision(2)
       << std::setw(12) << r.mkpe << std::setprecision(3) << std::setw(16) << r.auc
       << std::setw(10);
    if (r.reference) {
      os << "-";
    } else {
      os << r.samples;
    }
    os << '\n';
  }
  os.flags(flags);
  os << "(published_reference rows are context from a different, private dataset)\n";
}

}  // namespace handreg::harness
