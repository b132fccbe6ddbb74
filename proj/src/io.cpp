#include "morlie/io.hpp"

#include "morlie/clustering.hpp"
#include "morlie/rom_sim.hpp"
#include "morlie/subalgebra.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace morlie {

namespace fs = std::filesystem;

std::string format17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

std::string format6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
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

double parse_double(const std::string& s, int line_no) {
  try {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters");
    if (!std::isfinite(v))
      throw std::runtime_error("non-finite value at line " + std::to_string(line_no));
    return v;
  } catch (const std::runtime_error&) {
    throw;
  } catch (...) {
    throw std::runtime_error("cannot parse number '" + s + "' at line " + std::to_string(line_no));
  }
}

long parse_int(const std::string& s, int line_no) {
  try {
    size_t pos = 0;
    const long v = std::stol(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (...) {
    throw std::runtime_error("cannot parse integer '" + s + "' at line " + std::to_string(line_no));
  }
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);  // LF line endings everywhere
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  return f;
}

}  // namespace

void export_snapshots_csv(const SnapshotSet& S, const std::string& path) {
  auto f = open_out(path);
  f << "#morlie-snapshots v1\n";
  const Chart chart = S.chart();
  if (chart == Chart::pointcloud3d) {
    f << "traj,time,particle,x,y,z\n";
    for (const auto& r : S.records)
      for (int p = 0; p < r.state.count; ++p)
        f << r.traj << ',' << format17(r.time) << ',' << p << ','
          << format17(r.state.coords(3 * p)) << ',' << format17(r.state.coords(3 * p + 1)) << ','
          << format17(r.state.coords(3 * p + 2)) << '\n';
  } else if (chart == Chart::grid1d) {
    f << "traj,time,index,u\n";
    for (const auto& r : S.records)
      for (int i = 0; i < r.state.count; ++i)
        f << r.traj << ',' << format17(r.time) << ',' << i << ',' << format17(r.state.coords(i))
          << '\n';
  } else {
    f << "traj,time,q1,q2\n";
    for (const auto& r : S.records)
      f << r.traj << ',' << format17(r.time) << ',' << format17(r.state.coords(0)) << ','
        << format17(r.state.coords(1)) << '\n';
  }
}

SnapshotSet ingest_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::string line;
  int line_no = 0;
  if (!std::getline(f, line)) throw std::runtime_error("empty file: " + path);
  ++line_no;
  if (line.find("#morlie-snapshots v1") != 0)
    throw std::runtime_error(path + ": missing '#morlie-snapshots v1' header");
  if (!std::getline(f, line)) throw std::runtime_error(path + ": missing column header");
  ++line_no;
  const std::string header = line;
  Chart chart;
  if (header == "traj,time,particle,x,y,z")
    chart = Chart::pointcloud3d;
  else if (header == "traj,time,index,u")
    chart = Chart::grid1d;
  else if (header == "traj,time,q1,q2")
    chart = Chart::polar2d;
  else
    throw std::runtime_error(path + ": unknown column header '" + header + "'");

  // frames keyed by (traj, time); values keyed by particle/index
  std::map<std::pair<long, double>, std::map<long, Eigen::Vector3d>> cloud_frames;
  std::map<std::pair<long, double>, std::map<long, double>> grid_frames;
  std::map<std::pair<long, double>, Eigen::Vector2d> polar_frames;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cols = split_csv(line);
    const size_t want = chart == Chart::pointcloud3d ? 6 : 4;
    if (cols.size() != want)
      throw std::runtime_error(path + ": wrong column count at line " + std::to_string(line_no));
    const long traj = parse_int(cols[0], line_no);
    const double time = parse_double(cols[1], line_no);
    if (chart == Chart::pointcloud3d) {
      const long particle = parse_int(cols[2], line_no);
      Eigen::Vector3d p(parse_double(cols[3], line_no), parse_double(cols[4], line_no),
                        parse_double(cols[5], line_no));
      auto& frame = cloud_frames[{traj, time}];
      if (!frame.emplace(particle, p).second)
        throw std::runtime_error(path + ": duplicate particle at line " + std::to_string(line_no));
    } else if (chart == Chart::grid1d) {
      const long idx = parse_int(cols[2], line_no);
      auto& frame = grid_frames[{traj, time}];
      if (!frame.emplace(idx, parse_double(cols[3], line_no)).second)
        throw std::runtime_error(path + ": duplicate index at line " + std::to_string(line_no));
    } else {
      const Eigen::Vector2d q(parse_double(cols[2], line_no), parse_double(cols[3], line_no));
      if (!polar_frames.emplace(std::make_pair(traj, time), q).second)
        throw std::runtime_error(path + ": duplicate frame at line " + std::to_string(line_no));
    }
  }

  SnapshotSet S;
  auto push = [&](long traj, double time, StatePoint state) {
    SnapshotRecord rec;
    rec.traj = static_cast<int>(traj);
    rec.time = time;
    rec.param = Vector::Constant(1, static_cast<double>(traj));
    rec.state = std::move(state);
    S.records.push_back(std::move(rec));
  };
  if (chart == Chart::pointcloud3d) {
    for (const auto& [key, frame] : cloud_frames) {
      Vector coords(3 * frame.size());
      long expect = 0;
      for (const auto& [particle, p] : frame) {
        if (particle != expect++)
          throw std::runtime_error(path + ": particle ids not dense in frame");
        coords.segment<3>(3 * (expect - 1)) = p;
      }
      push(key.first, key.second, make_pointcloud(coords));
    }
  } else if (chart == Chart::grid1d) {
    for (const auto& [key, frame] : grid_frames) {
      Vector u(frame.size());
      long expect = 0;
      for (const auto& [idx, v] : frame) {
        if (idx != expect++) throw std::runtime_error(path + ": grid indices not dense in frame");
        u(expect - 1) = v;
      }
      push(key.first, key.second, make_grid(u));
    }
  } else {
    for (const auto& [key, q] : polar_frames) push(key.first, key.second, make_polar(q(0), q(1)));
  }
  if (S.records.empty()) throw std::runtime_error(path + ": no data rows");
  // assign step indices per trajectory in time order
  std::stable_sort(S.records.begin(), S.records.end(), [](const auto& a, const auto& b) {
    return a.traj != b.traj ? a.traj < b.traj : a.time < b.time;
  });
  int step = 0;
  for (size_t i = 0; i < S.records.size(); ++i) {
    if (i > 0 && S.records[i - 1].traj != S.records[i].traj) step = 0;
    S.records[i].step = step++;
  }
  S.sort_and_validate();
  return S;
}

void export_truth_csv(const TruthPaths& truth, const std::string& path) {
  auto f = open_out(path);
  f << "#morlie-truth v1\n";
  f << "time,cluster";
  for (int i = 0; i < 16; ++i) f << ",g" << i / 4 << i % 4;
  f << '\n';
  for (size_t c = 0; c < truth.paths.size(); ++c)
    for (size_t k = 0; k < truth.times.size(); ++k) {
      f << format17(truth.times[k]) << ',' << c;
      const Matrix& g = truth.paths[c][k].mat;
      for (int r = 0; r < 4; ++r)
        for (int cc = 0; cc < 4; ++cc) f << ',' << format17(g(r, cc));
      f << '\n';
    }
}

TruthPaths ingest_truth_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::string line;
  int line_no = 0;
  std::getline(f, line);
  ++line_no;
  if (line.find("#morlie-truth v1") != 0)
    throw std::runtime_error(path + ": missing '#morlie-truth v1' header");
  std::getline(f, line);  // column header
  ++line_no;
  std::map<long, std::map<double, Matrix>> per_cluster;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cols = split_csv(line);
    if (cols.size() != 18)
      throw std::runtime_error(path + ": wrong column count at line " + std::to_string(line_no));
    const double time = parse_double(cols[0], line_no);
    const long cluster = parse_int(cols[1], line_no);
    Matrix g(4, 4);
    for (int i = 0; i < 16; ++i) g(i / 4, i % 4) = parse_double(cols[2 + i], line_no);
    per_cluster[cluster][time] = g;
  }
  TruthPaths truth;
  for (auto& [cluster, path_map] : per_cluster) {
    std::vector<GroupElement> p;
    truth.times.clear();
    for (auto& [t, g] : path_map) {
      truth.times.push_back(t);
      p.emplace_back(g);
    }
    truth.paths.push_back(std::move(p));
  }
  return truth;
}

void export_sg_csv(const ReducedSnapshotMatrix& Sg, const std::string& path) {
  auto f = open_out(path);
  f << "#morlie-sg v1\n";
  f << "traj,step,step_to,time,cost,converged";
  for (int k = 0; k < Sg.basis.size(); ++k)
    f << ",c" << (Sg.basis.labels.empty() ? std::to_string(k) : Sg.basis.labels[k]);
  f << '\n';
  for (const auto& col : Sg.columns) {
    f << col.traj << ',' << col.step << ',' << col.step_to << ',' << format17(col.time) << ','
      << format17(col.fit_cost) << ',' << (col.converged ? 1 : 0);
    for (int k = 0; k < col.coeffs.size(); ++k) f << ',' << format17(col.coeffs(k));
    f << '\n';
  }
}

ReducedSnapshotMatrix ingest_sg_csv(const std::string& path, const AlgebraBasis& basis) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::string line;
  int line_no = 0;
  std::getline(f, line);
  ++line_no;
  if (line.find("#morlie-sg v1") != 0)
    throw std::runtime_error(path + ": missing '#morlie-sg v1' header");
  std::getline(f, line);
  ++line_no;
  ReducedSnapshotMatrix Sg;
  Sg.basis = basis;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cols = split_csv(line);
    if (static_cast<int>(cols.size()) != 6 + basis.size())
      throw std::runtime_error(path + ": wrong column count at line " + std::to_string(line_no));
    ReducedSnapshotColumn col;
    col.traj = static_cast<int>(parse_int(cols[0], line_no));
    col.step = static_cast<int>(parse_int(cols[1], line_no));
    col.step_to = static_cast<int>(parse_int(cols[2], line_no));
    col.time = parse_double(cols[3], line_no);
    col.fit_cost = parse_double(cols[4], line_no);
    col.converged = parse_int(cols[5], line_no) != 0;
    col.coeffs = Vector(basis.size());
    for (int k = 0; k < basis.size(); ++k) col.coeffs(k) = parse_double(cols[6 + k], line_no);
    Sg.columns.push_back(std::move(col));
  }
  return Sg;
}

void export_rho_csv(const ReducedVectorField& rho, const std::string& path) {
  auto f = open_out(path);
  f << "#morlie-rho v1\n";
  f << "t0," << format17(rho.spline.t_min()) << ",t1," << format17(rho.spline.t_max())
    << ",segments," << rho.spline.segments() << ",channels," << rho.spline.channels() << ",rmse,"
    << format17(rho.fit_rmse) << '\n';
  f << "knot,time";
  for (int c = 0; c < rho.spline.channels(); ++c) f << ",v" << c;
  for (int c = 0; c < rho.spline.channels(); ++c) f << ",m" << c;
  f << '\n';
  const int n = rho.spline.segments();
  for (int k = 0; k <= n; ++k) {
    const double t = rho.spline.t_min() + (rho.spline.t_max() - rho.spline.t_min()) * k / n;
    f << k << ',' << format17(t);
    // reconstruct knot values/slopes by evaluation at the knots
    const Vector v = rho.spline.eval(t);
    const Vector m = rho.spline.eval_derivative(t);
    for (int c = 0; c < v.size(); ++c) f << ',' << format17(v(c));
    for (int c = 0; c < m.size(); ++c) f << ',' << format17(m(c));
    f << '\n';
  }
}

ReducedVectorField ingest_rho_csv(const std::string& path, const AlgebraBasis& basis) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::string line;
  int line_no = 0;
  std::getline(f, line);
  ++line_no;
  if (line.find("#morlie-rho v1") != 0)
    throw std::runtime_error(path + ": missing '#morlie-rho v1' header");
  std::getline(f, line);
  ++line_no;
  auto meta = split_csv(line);
  if (meta.size() < 10) throw std::runtime_error(path + ": bad rho metadata");
  const double t0 = parse_double(meta[1], line_no);
  const double t1 = parse_double(meta[3], line_no);
  const int segments = static_cast<int>(parse_int(meta[5], line_no));
  const int channels = static_cast<int>(parse_int(meta[7], line_no));
  const double rmse = parse_double(meta[9], line_no);
  std::getline(f, line);
  ++line_no;  // column header
  Matrix values(segments + 1, channels), slopes(segments + 1, channels);
  int rows = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cols = split_csv(line);
    if (static_cast<int>(cols.size()) != 2 + 2 * channels)
      throw std::runtime_error(path + ": wrong column count at line " + std::to_string(line_no));
    const int k = static_cast<int>(parse_int(cols[0], line_no));
    for (int c = 0; c < channels; ++c) values(k, c) = parse_double(cols[2 + c], line_no);
    for (int c = 0; c < channels; ++c) slopes(k, c) = parse_double(cols[2 + channels + c], line_no);
    ++rows;
  }
  if (rows != segments + 1) throw std::runtime_error(path + ": knot rows missing");
  ReducedVectorField rho;
  rho.basis = basis;
  rho.spline = HermiteSpline(t0, t1, values, slopes);
  rho.fit_rmse = rmse;
  return rho;
}

void export_assignment_csv(const std::vector<int>& assignment, const std::string& path) {
  auto f = open_out(path);
  f << "particle,cluster\n";
  for (size_t p = 0; p < assignment.size(); ++p) f << p << ',' << assignment[p] << '\n';
}

void export_basis_csv(const AlgebraBasis& basis, const std::string& path) {
  auto f = open_out(path);
  const int n = basis.ambient_dim();
  f << "label";
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) f << ",m" << r << c;
  f << '\n';
  for (int k = 0; k < basis.size(); ++k) {
    f << (static_cast<int>(basis.labels.size()) > k ? basis.labels[k] : "e" + std::to_string(k));
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) f << ',' << format17(basis.elements[k].mat(r, c));
    f << '\n';
  }
}

void export_curve_csv(const ErrorCurve& curve, const std::string& path,
                      const std::string& value_name) {
  auto f = open_out(path);
  f << "time," << value_name << '\n';
  for (size_t i = 0; i < curve.times.size(); ++i)
    f << format17(curve.times[i]) << ',' << format17(curve.errors[i]) << '\n';
}

void export_spectrum_csv(const Vector& singular_values, const std::string& path) {
  auto f = open_out(path);
  f << "index,sigma\n";
  for (int i = 0; i < singular_values.size(); ++i)
    f << i << ',' << format17(singular_values(i)) << '\n';
}

// --- SVG ---------------------------------------------------------------------

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                    "#8c564b"};

struct Axis {
  double lo = 0.0, hi = 1.0;
  double map(double v, double px0, double px1) const {
    return px0 + (v - lo) / (hi - lo) * (px1 - px0);
  }
};

void expand(Axis& a, double v) {
  a.lo = std::min(a.lo, v);
  a.hi = std::max(a.hi, v);
}

}  // namespace

void write_line_svg(const std::string& path, const std::string& title, const std::string& xlabel,
                    const std::string& ylabel, const std::vector<PlotSeries>& series, bool log_y) {
  const double W = 720, H = 460, L = 75, R = 20, T = 40, B = 55;
  Axis ax, ay;
  bool first = true;
  for (const auto& s : series)
    for (size_t i = 0; i < s.x.size(); ++i) {
      double y = s.y[i];
      if (log_y) {
        if (!(y > 0.0)) continue;
        y = std::log10(y);
      }
      if (!std::isfinite(s.x[i]) || !std::isfinite(y)) continue;
      if (first) {
        ax.lo = ax.hi = s.x[i];
        ay.lo = ay.hi = y;
        first = false;
      } else {
        expand(ax, s.x[i]);
        expand(ay, y);
      }
    }
  if (first) {
    ax = {0, 1};
    ay = {0, 1};
  }
  if (ax.hi == ax.lo) ax.hi = ax.lo + 1;
  if (ay.hi == ay.lo) ay.hi = ay.lo + 1;
  const double pad = 0.05 * (ay.hi - ay.lo);
  ay.lo -= pad;
  ay.hi += pad;

  auto f = open_out(path);
  f << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H
    << "' font-family='sans-serif' font-size='12'>\n";
  f << "<rect width='100%' height='100%' fill='white'/>\n";
  f << "<text x='" << W / 2 << "' y='20' text-anchor='middle' font-size='14'>" << title
    << "</text>\n";
  // axes
  f << "<line x1='" << L << "' y1='" << H - B << "' x2='" << W - R << "' y2='" << H - B
    << "' stroke='black'/>\n";
  f << "<line x1='" << L << "' y1='" << T << "' x2='" << L << "' y2='" << H - B
    << "' stroke='black'/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double vx = ax.lo + (ax.hi - ax.lo) * i / 5.0;
    const double px = ax.map(vx, L, W - R);
    f << "<line x1='" << px << "' y1='" << H - B << "' x2='" << px << "' y2='" << H - B + 5
      << "' stroke='black'/>\n";
    f << "<text x='" << px << "' y='" << H - B + 18 << "' text-anchor='middle'>" << format6(vx)
      << "</text>\n";
  }
  if (log_y) {
    const int d0 = static_cast<int>(std::floor(ay.lo));
    const int d1 = static_cast<int>(std::ceil(ay.hi));
    for (int d = d0; d <= d1; ++d) {
      if (d < ay.lo || d > ay.hi) continue;
      const double py = ay.map(d, H - B, T);
      f << "<line x1='" << L - 5 << "' y1='" << py << "' x2='" << L << "' y2='" << py
        << "' stroke='black'/>\n";
      f << "<text x='" << L - 8 << "' y='" << py + 4 << "' text-anchor='end'>1e" << d
        << "</text>\n";
    }
  } else {
    for (int i = 0; i <= 5; ++i) {
      const double vy = ay.lo + (ay.hi - ay.lo) * i / 5.0;
      const double py = ay.map(vy, H - B, T);
      f << "<line x1='" << L - 5 << "' y1='" << py << "' x2='" << L << "' y2='" << py
        << "' stroke='black'/>\n";
      f << "<text x='" << L - 8 << "' y='" << py + 4 << "' text-anchor='end'>" << format6(vy)
        << "</text>\n";
    }
  }
  f << "<text x='" << (L + W - R) / 2 << "' y='" << H - 12 << "' text-anchor='middle'>" << xlabel
    << "</text>\n";
  f << "<text x='18' y='" << (T + H - B) / 2 << "' text-anchor='middle' transform='rotate(-90 18 "
    << (T + H - B) / 2 << ")'>" << ylabel << "</text>\n";

  int si = 0;
  for (const auto& s : series) {
    const char* color = kPalette[si % 6];
    f << "<polyline fill='none' stroke='" << color << "' stroke-width='1.5' points='";
    for (size_t i = 0; i < s.x.size(); ++i) {
      double y = s.y[i];
      if (log_y) {
        if (!(y > 0.0)) continue;
        y = std::log10(y);
      }
      if (!std::isfinite(s.x[i]) || !std::isfinite(y)) continue;
      f << format6(ax.map(s.x[i], L, W - R)) << ',' << format6(ay.map(y, H - B, T)) << ' ';
    }
    f << "'/>\n";
    if (!s.label.empty()) {
      const double ly = T + 16 + 16 * si;
      f << "<line x1='" << W - R - 150 << "' y1='" << ly << "' x2='" << W - R - 125 << "' y2='"
        << ly << "' stroke='" << color << "' stroke-width='2'/>\n";
      f << "<text x='" << W - R - 120 << "' y='" << ly + 4 << "'>" << s.label << "</text>\n";
    }
    ++si;
  }
  f << "</svg>\n";
}

void write_scatter_overlay_svg(const std::string& path, const std::string& title,
                               const StatePoint& data, const StatePoint& recon) {
  if (data.chart != Chart::pointcloud3d)
    throw std::invalid_argument("scatter overlay: pointcloud states required");
  const double W = 560, H = 560, L = 70, R = 20, T = 40, B = 55;
  Axis ax, ay;
  bool first = true;
  auto scan = [&](const StatePoint& s) {
    for (int i = 0; i < s.count; ++i) {
      if (first) {
        ax.lo = ax.hi = s.coords(3 * i);
        ay.lo = ay.hi = s.coords(3 * i + 1);
        first = false;
      }
      expand(ax, s.coords(3 * i));
      expand(ay, s.coords(3 * i + 1));
    }
  };
  scan(data);
  scan(recon);
  // equal scale
  const double cx = 0.5 * (ax.lo + ax.hi), cy = 0.5 * (ay.lo + ay.hi);
  const double half = 0.55 * std::max(ax.hi - ax.lo, std::max(ay.hi - ay.lo, 1e-6));
  ax = {cx - half, cx + half};
  ay = {cy - half, cy + half};

  auto f = open_out(path);
  f << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H
    << "' font-family='sans-serif' font-size='12'>\n";
  f << "<rect width='100%' height='100%' fill='white'/>\n";
  f << "<text x='" << W / 2 << "' y='20' text-anchor='middle' font-size='14'>" << title
    << "</text>\n";
  f << "<line x1='" << L << "' y1='" << H - B << "' x2='" << W - R << "' y2='" << H - B
    << "' stroke='black'/>\n";
  f << "<line x1='" << L << "' y1='" << T << "' x2='" << L << "' y2='" << H - B
    << "' stroke='black'/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double vx = ax.lo + (ax.hi - ax.lo) * i / 4.0;
    const double px = ax.map(vx, L, W - R);
    f << "<text x='" << px << "' y='" << H - B + 18 << "' text-anchor='middle'>" << format6(vx)
      << "</text>\n";
    const double vy = ay.lo + (ay.hi - ay.lo) * i / 4.0;
    const double py = ay.map(vy, H - B, T);
    f << "<text x='" << L - 8 << "' y='" << py + 4 << "' text-anchor='end'>" << format6(vy)
      << "</text>\n";
  }
  f << "<text x='" << (L + W - R) / 2 << "' y='" << H - 12
    << "' text-anchor='middle'>x (m)</text>\n";
  f << "<text x='18' y='" << (T + H - B) / 2 << "' text-anchor='middle' transform='rotate(-90 18 "
    << (T + H - B) / 2 << ")'>y (m)</text>\n";
  for (int i = 0; i < data.count; ++i) {
    const double px = ax.map(data.coords(3 * i), L, W - R);
    const double py = ay.map(data.coords(3 * i + 1), H - B, T);
    f << "<circle cx='" << format6(px) << "' cy='" << format6(py)
      << "' r='3' fill='none' stroke='#1f77b4'/>\n";
  }
  for (int i = 0; i < recon.count; ++i) {
    const double px = ax.map(recon.coords(3 * i), L, W - R);
    const double py = ay.map(recon.coords(3 * i + 1), H - B, T);
    f << "<path d='M " << format6(px - 3) << ' ' << format6(py) << " L " << format6(px + 3) << ' '
      << format6(py) << " M " << format6(px) << ' ' << format6(py - 3) << " L " << format6(px)
      << ' ' << format6(py + 3) << "' stroke='#d62728' stroke-width='1.2'/>\n";
  }
  f << "<circle cx='" << W - 150 << "' cy='" << T + 12 << "' r='3' fill='none' stroke='#1f77b4'/>"
    << "<text x='" << W - 140 << "' y='" << T + 16 << "'>data</text>\n";
  f << "<path d='M " << W - 153 << ' ' << T + 30 << " L " << W - 147 << ' ' << T + 30 << " M "
    << W - 150 << ' ' << T + 27 << " L " << W - 150 << ' ' << T + 33
    << "' stroke='#d62728'/><text x='" << W - 140 << "' y='" << T + 34
    << "'>reconstruction</text>\n";
  f << "</svg>\n";
}

// --- pipeline ----------------------------------------------------------------

namespace {

class StageClock {
 public:
  void record(const std::string& stage, double seconds) { entries_.emplace_back(stage, seconds); }
  void write(const std::string& path) const {
    auto f = open_out(path);
    for (const auto& [k, v] : entries_) f << k << " = " << format6(v) << " s\n";
  }

 private:
  std::vector<std::pair<std::string, double>> entries_;
};

class Timed {
 public:
  Timed(StageClock& clock, std::string stage)
      : clock_(clock), stage_(std::move(stage)), start_(std::chrono::steady_clock::now()) {}
  ~Timed() {
    const auto dt = std::chrono::steady_clock::now() - start_;
    clock_.record(stage_, std::chrono::duration<double>(dt).count());
  }

 private:
  StageClock& clock_;
  std::string stage_;
  std::chrono::steady_clock::time_point start_;
};

class Summary {
 public:
  void set(const std::string& key, const std::string& value) { entries_.emplace_back(key, value); }
  void set(const std::string& key, double value) { set(key, format17(value)); }
  void set(const std::string& key, int value) { set(key, std::to_string(value)); }
  void write(const std::string& path) const {
    auto f = open_out(path);
    for (const auto& [k, v] : entries_) f << k << " = " << v << '\n';
  }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

Trajectory data_trajectory(std::span<const SnapshotRecord> span) {
  Trajectory t;
  t.provenance = Provenance::fom;
  for (const auto& r : span) {
    t.times.push_back(r.time);
    t.states.push_back(r.state);
  }
  return t;
}

/// Relative column-to-column scatter: noise scale of a reduced snapshot
/// matrix, used to pick a noise-aware closure tolerance.
double column_scatter(const ReducedSnapshotMatrix& Sg) {
  std::vector<double> diffs, norms;
  for (size_t i = 0; i < Sg.columns.size(); ++i) {
    norms.push_back(Sg.columns[i].coeffs.norm());
    if (i > 0 && Sg.columns[i - 1].traj == Sg.columns[i].traj)
      diffs.push_back((Sg.columns[i].coeffs - Sg.columns[i - 1].coeffs).norm() / std::sqrt(2.0));
  }
  if (diffs.empty() || norms.empty()) return 0.0;
  auto median = [](std::vector<double>& v) {
    std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
    return v[v.size() / 2];
  };
  const double scale = median(norms);
  if (scale <= 0.0) return 0.0;
  return median(diffs) / scale;
}

int count_unconverged(const ReducedSnapshotMatrix& Sg) {
  int n = 0;
  for (const auto& c : Sg.columns)
    if (!c.converged) ++n;
  return n;
}

std::vector<PlotSeries> curve_series(const std::vector<std::pair<std::string, ErrorCurve>>& curves) {
  std::vector<PlotSeries> s;
  for (const auto& [label, c] : curves) s.push_back({label, c.times, c.errors});
  return s;
}

double cluster_accuracy(const std::vector<int>& found, const std::vector<int>& truth) {
  if (found.size() != truth.size() || found.empty()) return 0.0;
  const int nf = 1 + *std::max_element(found.begin(), found.end());
  const int nt = 1 + *std::max_element(truth.begin(), truth.end());
  Matrix confusion = Matrix::Zero(nf, nt);
  for (size_t i = 0; i < found.size(); ++i) confusion(found[i], truth[i]) += 1.0;
  // greedy assignment of found labels to truth labels
  double correct = 0.0;
  std::vector<bool> used_f(nf, false), used_t(nt, false);
  for (int round = 0; round < std::min(nf, nt); ++round) {
    int bi = -1, bj = -1;
    double best = -1.0;
    for (int i = 0; i < nf; ++i)
      for (int j = 0; j < nt; ++j)
        if (!used_f[i] && !used_t[j] && confusion(i, j) > best) {
          best = confusion(i, j);
          bi = i;
          bj = j;
        }
    if (bi < 0) break;
    used_f[bi] = used_t[bj] = true;
    correct += best;
  }
  return correct / static_cast<double>(found.size());
}

}  // namespace

PipelineResult run_pipeline(const RunConfig& cfg) {
  PipelineResult result;
  result.report_dir = cfg.output_dir;
  StageClock clock;
  Summary summary;
  fs::create_directories(cfg.output_dir);
  const auto out = [&](const std::string& name) { return cfg.output_dir + "/" + name; };

  try {
    // ---- stage 1: generate or ingest ----------------------------------------
    SnapshotSet S;
    RigidTruth rigid_truth;
    SheeringTruth sheering_truth;
    bool have_rigid_truth = false, have_sheering_truth = false;
    {
      Timed timer(clock, "generate");
      if (!cfg.input_csv.empty()) {
        S = ingest_csv(cfg.input_csv);
        summary.set("input", cfg.input_csv);
      } else {
        switch (cfg.bench.family) {
          case Family::rigid: {
            auto [s, t] = gen_rigid_cloud(cfg.bench);
            S = std::move(s);
            rigid_truth = std::move(t);
            have_rigid_truth = true;
            break;
          }
          case Family::sheering: {
            auto [s, t] = gen_sheering_clouds(cfg.bench);
            S = std::move(s);
            sheering_truth = std::move(t);
            have_sheering_truth = true;
            break;
          }
          case Family::radial:
            S = gen_radial_oscillator(cfg.bench);
            break;
          case Family::transport:
            S = gen_linear_transport(cfg.bench);
            break;
        }
      }
      export_snapshots_csv(S, out("snapshots.csv"));
      if (have_rigid_truth) {
        TruthPaths tp;
        for (const auto& r : S.trajectory(S.trajectory_ids().front())) tp.times.push_back(r.time);
        tp.paths.push_back(rigid_truth.path);
        export_truth_csv(tp, out("truth.csv"));
      } else if (have_sheering_truth) {
        TruthPaths tp;
        for (const auto& r : S.trajectory(S.trajectory_ids().front())) tp.times.push_back(r.time);
        tp.paths = sheering_truth.paths;
        export_truth_csv(tp, out("truth.csv"));
      }
    }
    const Chart chart = S.chart();
    const auto traj_ids = S.trajectory_ids();
    const auto first_traj = S.trajectory(traj_ids.front());
    const int n_steps = static_cast<int>(first_traj.size()) - 1;
    const double t_end = first_traj.back().time;
    summary.set("n_trajectories", static_cast<int>(traj_ids.size()));
    summary.set("n_steps", n_steps);
    summary.set("horizon", t_end);

    const bool shared_rho = chart == Chart::pointcloud3d;  // one motion, many clouds

    // ---- stage 2: action selection (clustering for multi-body clouds) -------
    ActionSpec spec;
    {
      Timed timer(clock, "action");
      if (chart == Chart::pointcloud3d) {
        if (cfg.bench.family == Family::sheering || have_sheering_truth) {
          ClusterSearchResult cs =
              cluster_search(S, cfg.cluster_neighbors, cfg.cluster_residual_tol, cfg.bench.seed,
                             cfg.cluster_windows);
          spec = make_clustered_affine_action(cs.assignment, cs.n_clusters);
          export_assignment_csv(cs.assignment, out("assignment.csv"));
          summary.set("cluster_count", cs.n_clusters);
          summary.set("cluster_reseeds", cs.reseeds);
          if (have_sheering_truth)
            summary.set("cluster_accuracy",
                        cluster_accuracy(cs.assignment, sheering_truth.assignment));
          if (cs.n_clusters == 1) spec = make_affine_cloud_action();
        } else {
          spec = make_affine_cloud_action();
        }
      } else if (chart == Chart::polar2d) {
        spec = make_so2_polar_action();
      } else {
        spec = make_grid_translation_action();
      }
      summary.set("action_kind", [&] {
        switch (spec.kind) {
          case ActionKind::affine_cloud: return "affine_cloud";
          case ActionKind::clustered_affine: return "clustered_affine";
          case ActionKind::grid_translation: return "grid_translation";
          case ActionKind::so2_polar: return "so2_polar";
        }
        return "";
      }());
      summary.set("action_group_dim", spec.group_dim());
      std::string labels;
      for (int k = 0; k < spec.group_basis.size(); ++k)
        labels += (k ? "|" : "") + (static_cast<int>(spec.group_basis.labels.size()) > k
                                        ? spec.group_basis.labels[k]
                                        : "e" + std::to_string(k));
      summary.set("action_basis_labels", labels);
    }

    if (shared_rho) {
      // ---- stage 3: fits -----------------------------------------------------
      ReducedSnapshotMatrix Sg_vb, Sg_vf;
      const bool want_vb = cfg.fit_mode != "velocity_free";
      const bool want_vf = cfg.fit_mode != "velocity_based";
      {
        Timed timer(clock, "fit_velocity_based");
        if (want_vb) {
          Sg_vb = fit_velocity_based(spec, S);
          export_sg_csv(Sg_vb, out("sg_velocity_based.csv"));
          summary.set("cost_velocity_based", one_step_cost(spec, S, Sg_vb));
        }
      }
      {
        Timed timer(clock, "fit_velocity_free");
        if (want_vf) {
          Sg_vf = fit_velocity_free(spec, S, cfg.lm);
          export_sg_csv(Sg_vf, out("sg_velocity_free.csv"));
          summary.set("cost_velocity_free", one_step_cost(spec, S, Sg_vf));
          const int bad = count_unconverged(Sg_vf);
          if (bad > 0) result.flags.push_back("velocity_free: " + std::to_string(bad) +
                                              " transitions not converged");
        }
      }

      // ---- stage 4: subalgebra identification --------------------------------
      SubalgebraSearchResult sub;
      double closure_tol_eff = cfg.closure_tol;
      {
        Timed timer(clock, "subalgebra");
        const int stride = cfg.ident_stride > 0 ? cfg.ident_stride : std::max(1, n_steps / 3);
        ReducedSnapshotMatrix Sg_id =
            want_vf ? fit_velocity_free(spec, S, cfg.lm, stride)
                    : fit_velocity_based(spec, S, stride);
        ReducedSnapshotMatrix Sg_id_avg = average_across_trajectories(Sg_id);
        const double scatter = column_scatter(Sg_id_avg);
        closure_tol_eff = std::max(cfg.closure_tol, std::min(0.2, 5.0 * scatter));
        sub = subalgebra_search(Sg_id_avg, cfg.energy_fraction, closure_tol_eff);
        export_sg_csv(Sg_id_avg, out("sg_identification.csv"));
        export_spectrum_csv(sub.singular_values, out("sg_spectrum.csv"));
        summary.set("ident_stride", stride);
        summary.set("ident_column_scatter", scatter);
        summary.set("closure_tol_effective", closure_tol_eff);
        summary.set("subalgebra_dim", sub.subalgebra.basis.size());
        summary.set("subalgebra_kept_singular", sub.kept_singular);
        summary.set("subalgebra_captured_energy", sub.captured_energy);
        summary.set("subalgebra_closure_residual", sub.subalgebra.closure_residual);
        summary.set("subalgebra_closure_rounds", sub.subalgebra.rounds);
        summary.set("subalgebra_match", sub.library_match.empty() ? "-" : sub.library_match);
        summary.set("subalgebra_match_defect", sub.match_defect);
        summary.set("subalgebra_snapped", sub.snapped ? 1 : 0);
        if (sub.subalgebra.basis.size() > 0)
          export_basis_csv(sub.subalgebra.basis, out("subalgebra_basis.csv"));
        if (!sub.subalgebra.closed) result.flags.push_back("subalgebra closure not reached");
      }

      // ---- stage 5: refit in subalgebra coordinates and fit rho_theta --------
      ActionSpec spec_h = spec;
      ReducedVectorField rho;
      {
        Timed timer(clock, "rho_theta");
        if (sub.subalgebra.basis.size() > 0 && sub.subalgebra.basis.size() < spec.group_dim())
          spec_h.group_basis = sub.subalgebra.basis;
        ReducedSnapshotMatrix Sg_h = want_vf ? fit_velocity_free(spec_h, S, cfg.lm)
                                             : fit_velocity_based(spec_h, S);
        const int samples = rho_theta_sample_count(
            static_cast<int>(average_across_trajectories(Sg_h).columns.size()), cfg.rho_stride);
        rho = fit_rho_theta(Sg_h, std::min(cfg.rho_segments, std::max(1, samples - 1)),
                            cfg.rho_stride, t_end);
        export_rho_csv(rho, out("rho.csv"));
        summary.set("rho_segments", rho.spline.segments());
        summary.set("rho_fit_rmse", rho.fit_rmse);
      }

      // ---- stage 6: simulate and reconstruct ---------------------------------
      RomModel model{spec_h, rho, first_traj.front().state};
      Trajectory recon;
      const Integrator method =
          cfg.integrator == "lie_euler" ? Integrator::lie_euler : Integrator::rkmk4;
      {
        Timed timer(clock, "simulate");
        std::vector<double> grid;
        for (const auto& r : first_traj) grid.push_back(r.time);
        recon = integrate_rom(model, grid, method);
        export_snapshots_csv(
            [&] {
              SnapshotSet R;
              for (size_t k = 0; k < recon.states.size(); ++k) {
                SnapshotRecord rec;
                rec.traj = 0;
                rec.step = static_cast<int>(k);
                rec.time = recon.times[k];
                rec.param = Vector::Constant(1, 0.0);
                rec.state = recon.states[k];
                R.records.push_back(std::move(rec));
              }
              return R;
            }(),
            out("reconstruction.csv"));
      }

      // ---- stage 7: evaluation ------------------------------------------------
      {
        Timed timer(clock, "evaluate");
        Trajectory data = data_trajectory(first_traj);
        ErrorCurve full = trajectory_errors(data, model, ErrorMode::full, method);
        ErrorCurve step = trajectory_errors(data, model, ErrorMode::step_ahead, method);
        export_curve_csv(full, out("error_full.csv"));
        export_curve_csv(step, out("error_step_ahead.csv"));
        summary.set("recon_error_final", full.errors.back());
        summary.set("recon_error_max", *std::max_element(full.errors.begin(), full.errors.end()));

        PodResult pod = pod_svd(S, cfg.center_pod, cfg.pod_time_row);
        export_spectrum_csv(pod.singular_values, out("pod_spectrum.csv"));
        const int k99 = pod.modes_for_energy(cfg.energy_fraction);
        summary.set("pod_modes_for_energy", k99);
        if (spec_h.group_dim() > 0)
          summary.set("pod_to_group_dim_ratio",
                      static_cast<double>(k99) / spec_h.group_dim());
        write_line_svg(out("error_full.svg"), "Reconstruction error", "time (s)", "error (m)",
                       curve_series({{"full", full}}), false);
        write_line_svg(out("error_step_ahead.svg"), "Step-ahead error", "time (s)", "error (m)",
                       curve_series({{"step-ahead", step}}), false);
        {
          PlotSeries ps{"sigma", {}, {}};
          for (int i = 0; i < pod.singular_values.size(); ++i) {
            ps.x.push_back(i);
            ps.y.push_back(pod.singular_values(i));
          }
          write_line_svg(out("pod_spectrum.svg"), "Snapshot singular values", "mode index",
                         "sigma", {ps}, true);
        }
        {
          PlotSeries ps{"sigma", {}, {}};
          for (int i = 0; i < sub.singular_values.size(); ++i) {
            ps.x.push_back(i);
            ps.y.push_back(sub.singular_values(i));
          }
          write_line_svg(out("sg_spectrum.svg"), "Reduced snapshot singular values", "mode index",
                         "sigma", {ps}, true);
        }
        const int k_first = std::min<int>(std::max(1, static_cast<int>(0.01 / (t_end / n_steps))),
                                          n_steps);
        const std::vector<std::pair<std::string, int>> snaps = {
            {"overlay_t0.svg", k_first}, {"overlay_mid.svg", n_steps / 2},
            {"overlay_end.svg", n_steps}};
        for (const auto& [name, k] : snaps)
          write_scatter_overlay_svg(out(name),
                                    "t = " + format6(first_traj[k].time) + " s",
                                    first_traj[k].state, recon.states[k]);
        if (cfg.compute_width) {
          WidthResult w = width_over_initial_conditions(S, spec_h, cfg.lm);
          summary.set("group_width", w.width);
          if (w.flagged > 0)
            result.flags.push_back("width: " + std::to_string(w.flagged) + " snapshots flagged");
        }
      }
    } else {
      // parameter-dependent families: fit each trajectory independently
      Timed timer(clock, "per_trajectory");
      double worst_final = 0.0, worst_max = 0.0, worst_cost_vb = 0.0, worst_cost_vf = 0.0;
      std::vector<std::pair<std::string, ErrorCurve>> curves;
      for (int id : traj_ids) {
        auto span = S.trajectory(id);
        SnapshotSet one;
        one.records.assign(span.begin(), span.end());
        ReducedSnapshotMatrix Sg = fit_velocity_free(spec, one, cfg.lm);
        ReducedSnapshotMatrix Sg_vb = fit_velocity_based(spec, one);
        worst_cost_vf = std::max(worst_cost_vf, one_step_cost(spec, one, Sg));
        worst_cost_vb = std::max(worst_cost_vb, one_step_cost(spec, one, Sg_vb));
        const int samples =
            rho_theta_sample_count(static_cast<int>(Sg.columns.size()), cfg.rho_stride);
        ReducedVectorField rho =
            fit_rho_theta(Sg, std::min(cfg.rho_segments, std::max(1, samples - 1)),
                          cfg.rho_stride, span.back().time);
        RomModel model{spec, rho, span.front().state};
        Trajectory data = data_trajectory(span);
        const Integrator method =
            cfg.integrator == "lie_euler" ? Integrator::lie_euler : Integrator::rkmk4;
        ErrorCurve full = trajectory_errors(data, model, ErrorMode::full, method);
        curves.push_back({"traj " + std::to_string(id), full});
        worst_final = std::max(worst_final, full.errors.back());
        worst_max = std::max(worst_max,
                             *std::max_element(full.errors.begin(), full.errors.end()));
        if (id == traj_ids.front()) {
          export_sg_csv(Sg, out("sg_velocity_free.csv"));
          export_rho_csv(rho, out("rho.csv"));
        }
      }
      summary.set("cost_velocity_based_worst", worst_cost_vb);
      summary.set("cost_velocity_free_worst", worst_cost_vf);
      summary.set("recon_error_final_worst", worst_final);
      summary.set("recon_error_max_worst", worst_max);
      {
        std::vector<PlotSeries> series = curve_series(curves);
        write_line_svg(out("error_full.svg"), "Reconstruction error", "time (s)", "error", series,
                       false);
        auto f = open_out(out("error_full.csv"));
        f << "time";
        for (const auto& [label, c] : curves) f << ',' << label;
        f << '\n';
        for (size_t i = 0; i < curves.front().second.times.size(); ++i) {
          f << format17(curves.front().second.times[i]);
          for (const auto& [label, c] : curves) f << ',' << format17(c.errors[i]);
          f << '\n';
        }
      }
      PodResult pod = pod_svd(S, cfg.center_pod, cfg.pod_time_row);
      export_spectrum_csv(pod.singular_values, out("pod_spectrum.csv"));
      summary.set("pod_modes_for_energy", pod.modes_for_energy(cfg.energy_fraction));
      if (cfg.compute_width) {
        WidthResult w = width_over_initial_conditions(S, spec, cfg.lm);
        summary.set("group_width", w.width);
        if (w.flagged > 0)
          result.flags.push_back("width: " + std::to_string(w.flagged) + " snapshots flagged");
      }
    }

    for (const auto& flag : result.flags) summary.set("flag", flag);
    summary.write(out("summary.txt"));
    clock.write(out("timings.txt"));
    result.exit_status = result.flags.empty() ? 0 : 1;
  } catch (const std::exception& e) {
    summary.set("error", e.what());
    summary.write(out("summary.txt"));
    clock.write(out("timings.txt"));
    result.flags.push_back(e.what());
    result.exit_status = 2;
  }
  return result;
}

}  // namespace morlie
