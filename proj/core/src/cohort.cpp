#include "foresee/cohort.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace foresee {

std::string format_double(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ValidationError("bad numeric field '" + s + "'");
  return v;
}

void Cohort::validate() const {
  if (patients.empty()) throw ValidationError("cohort: empty patient list");
  std::set<std::string> seen;
  for (const auto& p : patients) {
    if (!seen.insert(p.id).second)
      throw ValidationError("cohort: duplicate patient id '" + p.id + "'");
    if (!(p.survival_time > 0.0))
      throw ValidationError("patient '" + p.id + "': survival_time must be > 0, got " +
                            format_double(p.survival_time));
    if (p.event != 0 && p.event != 1)
      throw ValidationError("patient '" + p.id + "': event must be 0 or 1");
    if ((int)p.rna.size() != schema.rna_dim)
      throw ValidationError("patient '" + p.id + "': rna dim mismatch");
    if ((int)p.cnv_mut.size() != schema.cm_dim)
      throw ValidationError("patient '" + p.id + "': cnv_mut dim mismatch");
    for (double v : p.rna)
      if (!std::isfinite(v))
        throw ValidationError("patient '" + p.id + "': non-finite rna value");
    for (double v : p.cnv_mut)
      if (!std::isfinite(v))
        throw ValidationError("patient '" + p.id + "': non-finite cnv_mut value");
    for (Scale s : {Scale::Small, Scale::Medium, Scale::Large}) {
      const auto& g = p.grid(s);
      if (g.nodes() == 0)
        throw ValidationError("patient '" + p.id + "': empty " +
                              std::string(scale_name(s)) + " grid");
      if ((int)g.coords.size() != g.nodes())
        throw ValidationError("patient '" + p.id + "': grid coord/feature count mismatch");
      if (g.features.cols() != schema.d_x)
        throw ValidationError("patient '" + p.id + "': grid feature dim mismatch");
      if (!g.features.all_finite())
        throw ValidationError("patient '" + p.id + "': non-finite " +
                              std::string(scale_name(s)) + " grid feature");
      std::set<std::pair<int, int>> cs(g.coords.begin(), g.coords.end());
      if (cs.size() != g.coords.size())
        throw ValidationError("patient '" + p.id + "': duplicate grid coordinate in " +
                              std::string(scale_name(s)) + " grid");
    }
  }
  if (!latent_risk.empty() && latent_risk.size() != patients.size())
    throw ValidationError("cohort: latent_risk length mismatch");
}

namespace {

// P(censored | Tmax) under C ~ U(0,Tmax), T | z ~ Exp(rate(z)), z ~ N(0,1),
// integrated over z with a trapezoid rule.
double censor_prob(double tmax, double hazard_scale, double risk_coef) {
  const int npts = 401;
  const double zlim = 8.0;
  double num = 0.0, den = 0.0;
  for (int i = 0; i < npts; ++i) {
    double z = -zlim + 2.0 * zlim * i / (npts - 1);
    double w = std::exp(-0.5 * z * z);
    if (i == 0 || i == npts - 1) w *= 0.5;
    double r = hazard_scale * std::exp(risk_coef * z);
    double p = (1.0 - std::exp(-r * tmax)) / (r * tmax);
    num += w * p;
    den += w;
  }
  return num / den;
}

double solve_tmax(double target, double hazard_scale, double risk_coef) {
  double lo = 1e-9, hi = 1e12;
  for (int it = 0; it < 200; ++it) {
    double mid = std::sqrt(lo * hi);  // log-space bisection
    if (censor_prob(mid, hazard_scale, risk_coef) > target)
      lo = mid;
    else
      hi = mid;
  }
  return std::sqrt(lo * hi);
}

}  // namespace

Cohort generate_cohort(int n, const CohortSchema& schema, const GenerateOptions& opt,
                       RngStream& rng) {
  if (n < 2) throw ValidationError("generate_cohort: n must be >= 2");
  if (schema.d_x < 4 || schema.rna_dim < 4 || schema.cm_dim < 4)
    throw ValidationError("generate_cohort: dims must be >= 4");
  if (opt.censoring_rate < 0.0 || opt.censoring_rate >= 1.0)
    throw ValidationError("generate_cohort: censoring_rate must be in [0, 1)");

  // cohort-level structure, drawn once: signal directions and base patterns
  std::array<std::vector<double>, 3> path_dir;
  for (int s = 0; s < 3; ++s) {
    path_dir[s].resize(schema.d_x);
    double norm = 0.0;
    for (auto& v : path_dir[s]) {
      v = rng.normal();
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (auto& v : path_dir[s]) v /= norm;
  }
  std::vector<double> rna_dir(schema.rna_dim);
  for (auto& v : rna_dir) v = rng.normal() * 0.8;

  double tmax = opt.censoring_rate > 0.0
                    ? solve_tmax(opt.censoring_rate, opt.hazard_scale, opt.risk_coef)
                    : 0.0;

  Cohort cohort;
  cohort.schema = schema;
  cohort.patients.resize(n);
  cohort.latent_risk.resize(n);
  for (int i = 0; i < n; ++i) {
    PatientRecord& p = cohort.patients[i];
    p.id = "synth" + std::to_string(i);
    double z = rng.normal();
    cohort.latent_risk[i] = z;

    for (Scale s : {Scale::Small, Scale::Medium, Scale::Large}) {
      const GridShape& gs = schema.grid(s);
      PatientGrid& g = p.grid(s);
      g.features = Mat(gs.nodes(), schema.d_x);
      g.coords.reserve(gs.nodes());
      // risk signal lives in the top-left quadrant so graph context matters
      int br = std::max(1, gs.rows / 2), bc = std::max(1, gs.cols / 2);
      int node = 0;
      for (int r = 0; r < gs.rows; ++r) {
        for (int c = 0; c < gs.cols; ++c) {
          g.coords.emplace_back(r, c);
          bool in_block = r < br && c < bc;
          for (int f = 0; f < schema.d_x; ++f) {
            double base = 0.3 * std::sin(0.7 * (r + 1) * (f + 1) + (int)s) +
                          0.3 * std::cos(0.9 * (c + 1) * (f + 2));
            double signal = in_block ? z * path_dir[(int)s][f] : 0.0;
            g.features(node, f) = base + signal + opt.noise_level * rng.normal();
          }
          ++node;
        }
      }
    }

    p.rna.resize(schema.rna_dim);
    for (int f = 0; f < schema.rna_dim; ++f)
      p.rna[f] = rna_dir[f] * z + opt.noise_level * rng.normal();

    p.cnv_mut.assign(schema.cm_dim, 0.0);
    double spike_rate = 0.05 + 0.25 / (1.0 + std::exp(-z));
    for (int f = 0; f < schema.cm_dim; ++f) {
      if (rng.uniform() < spike_rate) {
        double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        p.cnv_mut[f] = sign * (1.0 + 0.2 * rng.normal());
      }
    }

    double rate = opt.hazard_scale * std::exp(opt.risk_coef * z);
    double u = rng.uniform();
    while (u <= 0.0) u = rng.uniform();
    double death = -std::log(u) / rate;
    if (opt.censoring_rate > 0.0) {
      double censor = rng.uniform() * tmax;
      if (death <= censor) {  // ties resolve as death
        p.survival_time = death;
        p.event = 1;
      } else {
        p.survival_time = censor;
        p.event = 0;
      }
    } else {
      p.survival_time = death;
      p.event = 1;
    }
    if (!(p.survival_time > 0.0)) p.survival_time = 1e-8;
  }
  cohort.validate();
  return cohort;
}

// ---- serialization ----

namespace {

void write_csv_row(std::ostream& os, const std::vector<std::string>& fields) {
  for (size_t i = 0; i < fields.size(); ++i) {
    if (i) os << ',';
    os << fields[i];
  }
  os << '\n';
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

CohortManifest write_cohort(const Cohort& cohort, const std::string& directory) {
  cohort.validate();
  fs::create_directories(directory);
  fs::path dir(directory);

  json manifest;
  manifest["d_x"] = cohort.schema.d_x;
  manifest["rna_dim"] = cohort.schema.rna_dim;
  manifest["cm_dim"] = cohort.schema.cm_dim;
  for (Scale s : {Scale::Small, Scale::Medium, Scale::Large})
    manifest["grids"][scale_name(s)] = {cohort.schema.grid(s).rows,
                                        cohort.schema.grid(s).cols};
  json ids = json::array();
  for (const auto& p : cohort.patients) ids.push_back(p.id);
  manifest["patients"] = ids;
  if (!cohort.latent_risk.empty()) {
    json lr = json::object();
    for (size_t i = 0; i < cohort.patients.size(); ++i)
      lr[cohort.patients[i].id] = format_double(cohort.latent_risk[i]);
    manifest["latent_risk"] = lr;
  }

  {
    std::ofstream mf(dir / "manifest.json");
    if (!mf) throw ValidationError("write_cohort: cannot write to " + directory);
    mf << manifest.dump(2) << '\n';
  }

  {
    std::ofstream sf(dir / "survival.csv");
    sf << "id,time,event\n";
    for (const auto& p : cohort.patients)
      write_csv_row(sf, {p.id, format_double(p.survival_time), std::to_string(p.event)});
  }

  for (const auto& p : cohort.patients) {
    for (Scale s : {Scale::Small, Scale::Medium, Scale::Large}) {
      std::ofstream pf(dir / ("P_" + p.id + "_" + scale_suffix(s) + ".csv"));
      const auto& g = p.grid(s);
      for (int i = 0; i < g.nodes(); ++i) {
        std::vector<std::string> row = {std::to_string(g.coords[i].first),
                                        std::to_string(g.coords[i].second)};
        for (int f = 0; f < g.features.cols(); ++f)
          row.push_back(format_double(g.features(i, f)));
        write_csv_row(pf, row);
      }
    }
    {
      std::ofstream rf(dir / ("R_" + p.id + ".csv"));
      std::vector<std::string> row;
      for (double v : p.rna) row.push_back(format_double(v));
      write_csv_row(rf, row);
    }
    {
      std::ofstream cf(dir / ("CM_" + p.id + ".csv"));
      std::vector<std::string> row;
      for (double v : p.cnv_mut) row.push_back(format_double(v));
      write_csv_row(cf, row);
    }
  }

  CohortManifest out;
  out.directory = directory;
  for (const auto& p : cohort.patients) out.ids.push_back(p.id);
  return out;
}

Cohort read_cohort(const std::string& directory) {
  fs::path dir(directory);
  std::ifstream mf(dir / "manifest.json");
  if (!mf) throw ValidationError("read_cohort: missing manifest.json in " + directory);
  json manifest;
  try {
    mf >> manifest;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("read_cohort: bad manifest: ") + e.what());
  }

  Cohort cohort;
  try {
    cohort.schema.d_x = manifest.at("d_x").get<int>();
    cohort.schema.rna_dim = manifest.at("rna_dim").get<int>();
    cohort.schema.cm_dim = manifest.at("cm_dim").get<int>();
    for (Scale s : {Scale::Small, Scale::Medium, Scale::Large}) {
      auto& g = manifest.at("grids").at(scale_name(s));
      cohort.schema.grids[(int)s] = GridShape{g.at(0).get<int>(), g.at(1).get<int>()};
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("read_cohort: manifest schema: ") + e.what());
  }

  // survival table
  std::map<std::string, std::pair<double, int>> survival;
  {
    std::ifstream sf(dir / "survival.csv");
    if (!sf) throw ValidationError("read_cohort: missing survival.csv");
    std::string line;
    std::getline(sf, line);  // header
    while (std::getline(sf, line)) {
      if (line.empty()) continue;
      auto f = split_csv(line);
      if (f.size() != 3)
        throw ValidationError("read_cohort: bad survival.csv row '" + line + "'");
      survival[f[0]] = {parse_double(f[1]), (int)parse_double(f[2])};
    }
  }

  for (const auto& idj : manifest.at("patients")) {
    std::string id = idj.get<std::string>();
    PatientRecord p;
    p.id = id;
    auto it = survival.find(id);
    if (it == survival.end())
      throw ValidationError("read_cohort: patient '" + id + "' missing from survival.csv");
    p.survival_time = it->second.first;
    p.event = it->second.second;

    for (Scale s : {Scale::Small, Scale::Medium, Scale::Large}) {
      fs::path file = dir / ("P_" + id + "_" + scale_suffix(s) + ".csv");
      std::ifstream pf(file);
      if (!pf) throw ValidationError("read_cohort: missing file " + file.string());
      std::string line;
      std::vector<std::vector<double>> rows;
      std::vector<std::pair<int, int>> coords;
      while (std::getline(pf, line)) {
        if (line.empty()) continue;
        auto f = split_csv(line);
        if ((int)f.size() != 2 + cohort.schema.d_x)
          throw ValidationError("read_cohort: patient '" + id + "': " +
                                std::string(scale_name(s)) +
                                " grid row has wrong field count");
        coords.emplace_back((int)parse_double(f[0]), (int)parse_double(f[1]));
        std::vector<double> feat(cohort.schema.d_x);
        for (int k = 0; k < cohort.schema.d_x; ++k) feat[k] = parse_double(f[2 + k]);
        rows.push_back(std::move(feat));
      }
      PatientGrid& g = p.grid(s);
      g.features = Mat((int)rows.size(), cohort.schema.d_x);
      for (size_t i = 0; i < rows.size(); ++i)
        for (int k = 0; k < cohort.schema.d_x; ++k) g.features((int)i, k) = rows[i][k];
      g.coords = std::move(coords);
    }

    auto read_vec = [&](const std::string& fname, int dim, const char* field) {
      std::ifstream vf(dir / fname);
      if (!vf) throw ValidationError("read_cohort: missing file " + fname);
      std::string line;
      std::getline(vf, line);
      auto f = split_csv(line);
      if ((int)f.size() != dim)
        throw ValidationError("read_cohort: patient '" + id + "': " + field +
                              " has wrong length");
      std::vector<double> out(dim);
      for (int k = 0; k < dim; ++k) out[k] = parse_double(f[k]);
      return out;
    };
    p.rna = read_vec("R_" + id + ".csv", cohort.schema.rna_dim, "rna");
    p.cnv_mut = read_vec("CM_" + id + ".csv", cohort.schema.cm_dim, "cnv_mut");
    cohort.patients.push_back(std::move(p));
  }

  if (manifest.contains("latent_risk")) {
    cohort.latent_risk.reserve(cohort.patients.size());
    for (const auto& p : cohort.patients)
      cohort.latent_risk.push_back(
          parse_double(manifest["latent_risk"].at(p.id).get<std::string>()));
  }

  cohort.validate();
  return cohort;
}

std::vector<int> FoldSplit::train_indices(int fold) const {
  std::vector<int> out;
  for (int f = 0; f < (int)folds.size(); ++f)
    if (f != fold) out.insert(out.end(), folds[f].begin(), folds[f].end());
  std::sort(out.begin(), out.end());
  return out;
}

FoldSplit kfold_split(int n, int k, RngStream& rng) {
  if (k < 2) throw ValidationError("kfold_split: k must be >= 2");
  if (k > n) throw ValidationError("kfold_split: k > n");
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  for (int i = n - 1; i > 0; --i) std::swap(idx[i], idx[rng.uniform_int(i + 1)]);
  FoldSplit split;
  split.folds.assign(k, {});
  for (int i = 0; i < n; ++i) split.folds[i % k].push_back(idx[i]);
  for (auto& f : split.folds) std::sort(f.begin(), f.end());
  return split;
}

}  // namespace foresee
