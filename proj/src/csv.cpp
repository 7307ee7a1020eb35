#include "effdiff/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "effdiff/errors.hpp"

#ifndef EFFDIFF_VERSION
#define EFFDIFF_VERSION "unknown"
#endif

namespace effdiff {

const char* version() { return EFFDIFF_VERSION; }

std::string CsvMeta::line() const {
  return "# effdiff " + std::string(version()) + " config_hash=" + config_hash +
         " seed=" + std::to_string(seed);
}

std::string hash_text(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

AtomicFile::AtomicFile(std::string path) : path_(std::move(path)), tmp_(path_ + ".tmp") {
  const auto parent = std::filesystem::path(path_).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  out_.open(tmp_, std::ios::binary | std::ios::trunc);
  if (!out_) throw ConfigError("cannot open " + tmp_ + " for writing");
}

AtomicFile::~AtomicFile() {
  if (!closed_) {
    out_.close();
    std::error_code ec;
    std::filesystem::remove(tmp_, ec);
  }
}

void AtomicFile::close() {
  if (closed_) return;
  out_.flush();
  if (!out_) throw ConfigError("write failed for " + tmp_);
  out_.close();
  std::filesystem::rename(tmp_, path_);
  closed_ = true;
}

void write_profile_csv(const std::string& path, const Profile& profile, const CsvMeta& meta) {
  AtomicFile f(path);
  auto& o = f.stream();
  o << meta.line() << "\n";
  o << "bin_index,z_center,value,count\n";
  for (int i = 0; i < profile.grid.n_bins; ++i) {
    const std::int64_t c = profile.counts.empty() ? 0 : profile.counts[i];
    o << i << ',' << format_double(profile.grid.center(i)) << ',' << format_double(profile.values[i])
      << ',' << c << "\n";
  }
  f.close();
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

double to_double(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad number '" + s + "' in " + where);
  }
}

}  // namespace

Profile read_profile_csv(const std::string& path, double outside) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read profile " + path);
  std::string line;
  bool header = false;
  std::vector<double> centers, values;
  std::vector<std::int64_t> counts;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto cells = split(line);
    if (!header) {
      if (cells.size() != 4 || cells[0] != "bin_index" || cells[1] != "z_center" || cells[2] != "value" ||
          cells[3] != "count")
        throw ConfigError(path + ": expected header bin_index,z_center,value,count");
      header = true;
      continue;
    }
    if (cells.size() != 4) throw ConfigError(path + ": malformed row '" + line + "'");
    if (static_cast<std::size_t>(to_double(cells[0], path)) != centers.size())
      throw ConfigError(path + ": bin indices must be consecutive from 0");
    centers.push_back(to_double(cells[1], path));
    values.push_back(to_double(cells[2], path));
    counts.push_back(static_cast<std::int64_t>(to_double(cells[3], path)));
  }
  if (centers.size() < 2) throw ConfigError(path + ": a profile needs at least two bins");
  LatentGrid g;
  const double dz = (centers.back() - centers.front()) / static_cast<double>(centers.size() - 1);
  g.n_bins = static_cast<int>(centers.size());
  g.z_min = centers.front() - 0.5 * dz;
  g.z_max = centers.back() + 0.5 * dz;
  for (std::size_t i = 0; i < centers.size(); ++i)
    if (std::abs(g.center(static_cast<int>(i)) - centers[i]) > 1e-9 * std::max(1.0, std::abs(dz) * g.n_bins))
      throw ConfigError(path + ": bin centers are not evenly spaced");
  Profile p(g, 0.0, outside);
  p.values = std::move(values);
  p.counts = std::move(counts);
  p.validate();
  return p;
}

void write_sweep_csv(const std::string& path, const std::vector<SweepCell>& cells, const CsvMeta& meta) {
  AtomicFile f(path);
  auto& o = f.stream();
  o << meta.line() << "\n";
  o << "scheme,alpha,dt,tau_hat,ci_low,ci_high,n_transitions,accept_rate,failed\n";
  for (const auto& c : cells) {
    o << scheme_name(c.scheme) << ',' << format_double(c.alpha) << ',' << format_double(c.dt) << ','
      << format_double(c.result.tau_hat) << ',' << format_double(c.result.ci_low) << ','
      << format_double(c.result.ci_high) << ',' << c.result.tau.size() << ','
      << format_double(c.accept_rate) << ',' << (c.failed ? 1 : 0) << "\n";
  }
  f.close();
}

void write_rejection_csv(const std::string& path, const std::vector<RejectionRow>& rows,
                         const CsvMeta& meta) {
  AtomicFile f(path);
  auto& o = f.stream();
  o << meta.line() << "\n";
  o << "scheme,alpha,dt,category,count,percent\n";
  constexpr StepOutcome kOrder[] = {StepOutcome::FailFwdMomenta, StepOutcome::FailFwdPosition,
                                    StepOutcome::FailBwdMomenta, StepOutcome::FailBwdPosition,
                                    StepOutcome::FailReversibility, StepOutcome::Metropolis,
                                    StepOutcome::Accepted};
  for (const auto& r : rows) {
    const std::string prefix =
        std::string(scheme_name(r.scheme)) + ',' + format_double(r.alpha) + ',' + format_double(r.dt) + ',';
    for (StepOutcome oc : kOrder)
      o << prefix << outcome_name(oc) << ',' << r.breakdown.count(oc) << ','
        << format_double(r.breakdown.percent(oc)) << "\n";
    o << prefix << "global," << (r.breakdown.trials - r.breakdown.count(StepOutcome::Accepted)) << ','
      << format_double(r.breakdown.global_percent()) << "\n";
  }
  f.close();
}

TrajectoryWriter::TrajectoryWriter(const std::string& path, Kind kind, const CsvMeta& meta)
    : file_(path) {
  auto& o = file_.stream();
  o << meta.line() << "\n";
  o << (kind == Kind::Overdamped ? "iteration,xi,V,accepted,bin\n" : "iteration,xi,H,cause\n");
}

void TrajectoryWriter::overdamped_row(std::int64_t it, double xi, double v, bool accepted, int bin) {
  file_.stream() << it << ',' << format_double(xi) << ',' << format_double(v) << ',' << (accepted ? 1 : 0)
                 << ',' << bin << "\n";
}

void TrajectoryWriter::kinetic_row(std::int64_t it, double xi, double h, StepOutcome cause) {
  file_.stream() << it << ',' << format_double(xi) << ',' << format_double(h) << ',' << outcome_name(cause)
                 << "\n";
}

}  // namespace effdiff
