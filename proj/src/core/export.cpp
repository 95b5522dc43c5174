#include "core/export.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace hypcbc::exporter {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json point_list(const std::vector<geom::Vec>& pts) {
  json arr = json::array();
  for (const auto& p : pts) arr.push_back({p[0], p[1]});
  return arr;
}

json unit_circle(size_t segments = 256) {
  json arr = json::array();
  for (size_t i = 0; i <= segments; ++i) {
    const double a = 2.0 * 3.141592653589793238462643 *
                     static_cast<double>(i) / static_cast<double>(segments);
    arr.push_back({std::cos(a), std::sin(a)});
  }
  return arr;
}

void write_text_atomic(const std::string& path, const std::string& text) {
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp(path + ".tmp");
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw_data("cannot write " + path);
    f << text;
  }
  fs::rename(tmp, target);
}

// The 2-d hyperbolic branch: bottleneck branch of a two-branch model,
// otherwise branch 1 when it is 2-d.
int disk_branch(const model::ModelParams& params) {
  if (params.method == model::Method::Erm)
    throw_config("erm model has no hyperbolic branch to export");
  if (params.method == model::Method::HypCbc) {
    if (params.dims.d2 != 2)
      throw_config("two-branch model's bottleneck is not 2-d");
    return 2;
  }
  if (params.dims.d1 != 2)
    throw_config("model has no 2-d branch (d1 = " +
                 std::to_string(params.dims.d1) + ")");
  return 1;
}

}  // namespace

void export_disk_embeddings(const model::ModelParams& params,
                            const data::EmbeddingDataset& ds,
                            data::SplitTag split, const std::string& out_stem) {
  const int branch = disk_branch(params);
  const std::vector<size_t> rows = ds.split_indices(split);
  if (rows.empty())
    throw_data("export: split '" + data::split_tag_name(split) +
               "' has no samples");

  constexpr size_t kChunk = 256;
  std::vector<geom::Vec> points;
  points.reserve(rows.size());
  for (size_t start = 0; start < rows.size(); start += kChunk) {
    const size_t end = std::min(rows.size(), start + kChunk);
    const std::vector<size_t> chunk(rows.begin() + static_cast<ptrdiff_t>(start),
                                    rows.begin() + static_cast<ptrdiff_t>(end));
    const ad::Tensor z =
        model::eval_embedding(params, ds.gather(chunk), branch, "postmap");
    for (size_t i = 0; i < chunk.size(); ++i)
      points.push_back({z.at(i, 0), z.at(i, 1)});
  }

  std::ostringstream csv;
  csv << "x,y,class,domain\n";
  json jpoints = json::array();
  for (size_t i = 0; i < rows.size(); ++i) {
    const size_t r = rows[i];
    csv << fmt(points[i][0]) << ',' << fmt(points[i][1]) << ','
        << ds.class_labels[r] << ',';
    json jp;
    jp["x"] = points[i][0];
    jp["y"] = points[i][1];
    jp["class"] = ds.class_labels[r];
    if (ds.has_domains()) {
      csv << ds.domain_labels[r];
      jp["domain"] = ds.domain_labels[r];
    }
    csv << '\n';
    jpoints.push_back(jp);
  }
  write_text_atomic(out_stem + ".csv", csv.str());

  json disk;
  disk["curvature"] = params.curvature;
  disk["split"] = data::split_tag_name(split);
  disk["unit_circle"] = unit_circle();
  disk["points"] = jpoints;
  write_text_atomic(out_stem + ".disk.json", disk.dump(2) + "\n");
}

void export_boundary_toy(const BoundaryToySpec& spec,
                         const std::string& out_path) {
  if (spec.p.size() != 2 || spec.normal.size() != 2)
    throw_config("boundary toy is 2-d only");
  const geom::Curvature curv(spec.curvature);
  const geom::BallPoint p = geom::BallPoint::project(spec.p, curv);
  const double an = geom::norm(spec.normal);
  if (an == 0.0) throw_config("boundary toy normal must be nonzero");
  const geom::Vec a_hat{spec.normal[0] / an, spec.normal[1] / an};
  // In-plane direction of the gyroplane: tangent vectors orthogonal to a.
  const geom::Vec u{-a_hat[1], a_hat[0]};

  // Gyroplane through p = exp_p of the tangent line {t*u}; t_max reaches
  // close to the rim.
  const double t_max = 3.0 / std::sqrt(spec.curvature);
  std::vector<geom::Vec> arc;
  arc.reserve(spec.boundary_samples);
  for (size_t i = 0; i < spec.boundary_samples; ++i) {
    const double t = -t_max + 2.0 * t_max * static_cast<double>(i) /
                                  static_cast<double>(spec.boundary_samples - 1);
    arc.push_back(geom::exp_map(p, geom::Vec{t * u[0], t * u[1]}).coords());
  }

  // Two label clusters on opposite sides of the plane, built in the tangent
  // space at p.
  Rng rng(spec.seed, "boundary_toy");
  std::vector<geom::Vec> cluster_pts;
  std::vector<int> cluster_labels;
  for (int side = 0; side < 2; ++side) {
    const double sign = side == 0 ? 1.0 : -1.0;
    for (size_t i = 0; i < spec.cluster_samples; ++i) {
      const double along = 0.45 * rng.normal();
      const double away = sign * (0.55 + 0.18 * std::abs(rng.normal()));
      const geom::Vec v{away * a_hat[0] + along * u[0],
                        away * a_hat[1] + along * u[1]};
      cluster_pts.push_back(geom::exp_map(p, v).coords());
      cluster_labels.push_back(side);
    }
  }

  const geom::BallPoint origin = geom::BallPoint::origin(2, curv);
  auto log0 = [&](const geom::Vec& x) {
    return geom::log_map(origin, geom::BallPoint::project(x, curv));
  };
  std::vector<geom::Vec> arc_tangent, clusters_tangent;
  for (const auto& x : arc) arc_tangent.push_back(log0(x));
  for (const auto& x : cluster_pts) clusters_tangent.push_back(log0(x));

  // Euclidean counterpart, laid out in tangent space: straight separator
  // through log_0(p) with the same normal, clusters mirrored on both sides.
  const geom::Vec w0 = geom::log_map(origin, p);
  const double line_reach = 3.0 / std::sqrt(spec.curvature);
  std::vector<geom::Vec> line;
  line.reserve(spec.boundary_samples);
  for (size_t i = 0; i < spec.boundary_samples; ++i) {
    const double t =
        -line_reach + 2.0 * line_reach * static_cast<double>(i) /
                          static_cast<double>(spec.boundary_samples - 1);
    line.push_back({w0[0] + t * u[0], w0[1] + t * u[1]});
  }
  std::vector<geom::Vec> line_disk;
  for (const auto& w : line)
    line_disk.push_back(geom::exp_map(origin, w).coords());
  std::vector<geom::Vec> clusters_euclidean = clusters_tangent;
  std::vector<geom::Vec> clusters_euclidean_disk;
  for (const auto& w : clusters_euclidean)
    clusters_euclidean_disk.push_back(geom::exp_map(origin, w).coords());

  auto cluster_json = [&](const std::vector<geom::Vec>& pts) {
    json arr = json::array();
    for (size_t i = 0; i < pts.size(); ++i)
      arr.push_back(
          {{"x", pts[i][0]}, {"y", pts[i][1]}, {"label", cluster_labels[i]}});
    return arr;
  };

  json out;
  out["curvature"] = spec.curvature;
  out["gyroplane"] = {{"p", {p.coords()[0], p.coords()[1]}},
                      {"normal", {a_hat[0], a_hat[1]}}};
  out["unit_circle"] = unit_circle();
  out["panels"] = {
      {"hyperbolic_disk",
       {{"boundary", point_list(arc)}, {"clusters", cluster_json(cluster_pts)}}},
      {"hyperbolic_tangent",
       {{"boundary", point_list(arc_tangent)},
        {"clusters", cluster_json(clusters_tangent)}}},
      {"euclidean_tangent",
       {{"boundary", point_list(line)},
        {"clusters", cluster_json(clusters_euclidean)}}},
      {"euclidean_disk",
       {{"boundary", point_list(line_disk)},
        {"clusters", cluster_json(clusters_euclidean_disk)}}}};
  write_text_atomic(out_path, out.dump(2) + "\n");
}

}  // namespace hypcbc::exporter
