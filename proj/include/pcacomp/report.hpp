#ifndef PCACOMP_REPORT_HPP
#define PCACOMP_REPORT_HPP

#include "bounds.hpp"
#include "clustering.hpp"
#include "compression.hpp"
#include "model.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace pcacomp {

namespace detail {

inline std::string fixed3(const std::optional<double>& v) {
  if (!v) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f", *v);
  return buf;
}

inline nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline nlohmann::json averages_json(const std::optional<DistanceAverages>& a) {
  if (!a) return nullptr;
  return {{"pairs", a->pairs},
          {"excluded", a->excluded},
          {"pre_avg", a->pre_avg},
          {"post_avg", a->post_avg},
          {"ratio_avg", optional_json(a->ratio_avg)},
          {"ratio_of_averages", optional_json(a->ratio_of_averages)}};
}

}  // namespace detail

/// Table layout: cluster (size) | inter pre, post, ratio | intra pre, post, ratio. Three decimals.
inline std::string cluster_summary_tsv(const ClusterSummary& summary) {
  std::ostringstream out;
  out << "cluster\tinter_pre\tinter_post\tinter_ratio\tintra_pre\tintra_post\tintra_ratio\n";
  for (const auto& row : summary.rows) {
    out << row.name << " (" << row.size << ")";
    for (const auto* avg : {&row.inter, &row.intra}) {
      if (*avg)
        out << '\t' << detail::fixed3((*avg)->pre_avg) << '\t' << detail::fixed3((*avg)->post_avg) << '\t'
            << detail::fixed3((*avg)->ratio_avg);
      else
        out << "\tNA\tNA\tNA";
    }
    out << '\n';
  }
  return out.str();
}

inline nlohmann::json cluster_summary_json(const ClusterSummary& summary) {
  nlohmann::json j;
  j["total_pairs"] = summary.total_pairs;
  auto rows = nlohmann::json::array();
  for (const auto& row : summary.rows)
    rows.push_back({{"cluster", row.cluster},
                    {"name", row.name},
                    {"size", row.size},
                    {"inter", detail::averages_json(row.inter)},
                    {"intra", detail::averages_json(row.intra)}});
  j["clusters"] = rows;
  return j;
}

/// Two columns: x (top fraction of pairs) and y (intra fraction).
inline std::string curve_csv(const std::vector<CurvePoint>& curve) {
  std::ostringstream out;
  out << "x,y\n";
  char buf[64];
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof(buf), "%.2f,%.17g\n", p.x, p.y);
    out << buf;
  }
  return out.str();
}

inline std::string point_summary_csv(const std::vector<PointSummary>& points) {
  std::ostringstream out;
  out << "point,cluster,intra_avg,inter_avg,intra_partners,inter_partners,intra_excluded,inter_excluded\n";
  char buf[64];
  auto field = [&](const std::optional<double>& v) -> std::string {
    if (!v) return "NA";
    std::snprintf(buf, sizeof(buf), "%.17g", *v);
    return buf;
  };
  for (const auto& p : points)
    out << p.point << ',' << p.cluster << ',' << field(p.intra_avg) << ',' << field(p.inter_avg) << ','
        << p.intra_partners << ',' << p.inter_partners << ',' << p.intra_excluded << ',' << p.inter_excluded << '\n';
  return out.str();
}

inline nlohmann::json centering_report_json(const CenteringReport& r) {
  nlohmann::json j;
  j["pcs"] = r.pcs;
  j["mean_cosine"] = detail::optional_json(r.mean_cosine);
  j["uncentered"] = cluster_summary_json(r.uncentered);
  j["centered"] = cluster_summary_json(r.centered);
  auto cells = nlohmann::json::array();
  for (const auto& c : r.cells)
    cells.push_back({{"cluster", c.cluster},
                     {"intra_uncentered", detail::optional_json(c.intra_uncentered)},
                     {"intra_centered", detail::optional_json(c.intra_centered)},
                     {"intra_relative_delta", detail::optional_json(c.intra_relative_delta())},
                     {"inter_uncentered", detail::optional_json(c.inter_uncentered)},
                     {"inter_centered", detail::optional_json(c.inter_centered)},
                     {"inter_relative_delta", detail::optional_json(c.inter_relative_delta())}});
  j["cells"] = cells;
  return j;
}

inline std::string centering_report_tsv(const CenteringReport& r) {
  std::ostringstream out;
  out << "# |cos(top uncentered PC, mean)| = " << detail::fixed3(r.mean_cosine) << "\n";
  out << "cluster\tintra_uncentered\tintra_centered\tintra_delta\tinter_uncentered\tinter_centered\tinter_delta\n";
  for (std::size_t i = 0; i < r.cells.size(); ++i) {
    const auto& c = r.cells[i];
    out << r.uncentered.rows[i].name << '\t' << detail::fixed3(c.intra_uncentered) << '\t'
        << detail::fixed3(c.intra_centered) << '\t' << detail::fixed3(c.intra_relative_delta()) << '\t'
        << detail::fixed3(c.inter_uncentered) << '\t' << detail::fixed3(c.inter_centered) << '\t'
        << detail::fixed3(c.inter_relative_delta()) << '\n';
  }
  return out.str();
}

inline nlohmann::json comparison_report_json(const ComparisonReport& r) {
  nlohmann::json j;
  j["k"] = r.k;
  j["pcs"] = r.pcs;
  j["neighbors"] = r.neighbors;
  auto scores = nlohmann::json::array();
  for (const auto& s : r.scores)
    scores.push_back({{"arm", s.arm},
                      {"seed", s.seed},
                      {"ari", s.ari},
                      {"nmi", s.nmi},
                      {"accuracy", s.accuracy},
                      {"clusters_found", s.clusters_found}});
  j["scores"] = scores;
  nlohmann::json medians;
  for (const char* arm : {"raw-kmeans", "pca-kmeans", "pca-knn-louvain"}) {
    const auto a = r.values(arm, &ArmScore::ari);
    if (a.empty()) continue;
    medians[arm] = {{"ari", median(a)},
                    {"nmi", median(r.values(arm, &ArmScore::nmi))},
                    {"accuracy", median(r.values(arm, &ArmScore::accuracy))}};
  }
  j["medians"] = medians;
  return j;
}

inline std::string comparison_report_tsv(const ComparisonReport& r) {
  std::ostringstream out;
  out << "arm\tseed\tari\tnmi\taccuracy\tclusters_found\n";
  for (const auto& s : r.scores)
    out << s.arm << '\t' << s.seed << '\t' << detail::fixed3(s.ari) << '\t' << detail::fixed3(s.nmi) << '\t'
        << detail::fixed3(s.accuracy) << '\t' << s.clusters_found << '\n';
  return out.str();
}

inline std::string bound_report_tsv(const BoundReport& r) {
  std::ostringstream out;
  out << "bound\tcluster\tother\tkind\tanalytic\tvacuous\tempirical\tviolations\ttrials\n";
  for (const auto& rec : r.records)
    out << rec.bound << '\t' << rec.cluster + 1 << '\t' << (rec.other_cluster ? std::to_string(*rec.other_cluster + 1) : "-")
        << '\t' << (rec.lower ? "lower" : "upper") << '\t' << detail::fixed3(rec.analytic) << '\t'
        << (rec.vacuous ? "yes" : "no") << '\t' << detail::fixed3(rec.empirical) << '\t' << rec.violations << '\t'
        << rec.trials << '\n';
  return out.str();
}

inline nlohmann::json model_stats_json(const ModelStats& s) {
  nlohmann::json j;
  j["d"] = s.d;
  j["n"] = s.n;
  j["k"] = s.k;
  j["sigma_max2"] = s.sigma_max2;
  j["sigma_j2"] = s.sigma_j2;
  std::vector<double> sv(s.mean_singular_values.data(), s.mean_singular_values.data() + s.mean_singular_values.size());
  j["mean_singular_values"] = sv;
  j["s_k"] = s.s_k;
  j["min_separation"] = detail::optional_json(s.min_separation());
  return j;
}

inline nlohmann::json regime_json(const RegimeReport& r) {
  return {{"separation_ratio", detail::optional_json(r.separation_ratio)},
          {"separation_ok", r.separation_ok ? nlohmann::json(*r.separation_ok) : nlohmann::json(nullptr)},
          {"spectral_ratio", r.spectral_ratio},
          {"spectral_ok", r.spectral_ok},
          {"threshold", r.threshold}};
}

}  // namespace pcacomp

#endif
