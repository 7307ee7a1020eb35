#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "effdiff/harness.hpp"
#include "effdiff/latent.hpp"

namespace effdiff {

const char* version();

/// Recorded as the first (comment) line of every emitted CSV.
struct CsvMeta {
  std::string config_hash;
  std::uint64_t seed = 0;

  std::string line() const;
};

/// FNV-1a, printed as 16 hex digits.
std::string hash_text(const std::string& text);

/// Shortest round-trip decimal representation.
std::string format_double(double x);

/// Writes to path + ".tmp" and renames into place on close().
class AtomicFile {
 public:
  explicit AtomicFile(std::string path);
  ~AtomicFile();
  AtomicFile(const AtomicFile&) = delete;
  AtomicFile& operator=(const AtomicFile&) = delete;

  std::ofstream& stream() { return out_; }
  void close();

 private:
  std::string path_, tmp_;
  std::ofstream out_;
  bool closed_ = false;
};

void write_profile_csv(const std::string& path, const Profile& profile, const CsvMeta& meta);
/// Reads (bin_index, z_center, value, count); infers the grid from the
/// centers. Throws ConfigError on schema or grid problems.
Profile read_profile_csv(const std::string& path, double outside);

void write_sweep_csv(const std::string& path, const std::vector<SweepCell>& cells, const CsvMeta& meta);

struct RejectionRow {
  Scheme scheme;
  double alpha;
  double dt;
  RejectionBreakdown breakdown;
};
void write_rejection_csv(const std::string& path, const std::vector<RejectionRow>& rows,
                         const CsvMeta& meta);

/// Streaming writer for per-step diagnostics.
class TrajectoryWriter {
 public:
  enum class Kind { Overdamped, Kinetic };
  TrajectoryWriter(const std::string& path, Kind kind, const CsvMeta& meta);

  void overdamped_row(std::int64_t it, double xi, double v, bool accepted, int bin);
  void kinetic_row(std::int64_t it, double xi, double h, StepOutcome cause);
  void close() { file_.close(); }

 private:
  AtomicFile file_;
};

}  // namespace effdiff
