#pragma once

#include <cstdint>
#include <string>
#include <vector>

// Synthetic quasi-periodic echo analog: a pulsating ellipse (periodic
// contraction) with smooth center drift (aperiodic component) and additive
// acquisition noise. The regression target is the fractional area change
// between diastole and systole, in percent, known analytically from the
// drawn radii.

namespace qpart::synth {

struct CohortSpec {
  std::string name;
  int n_samples = 128;
  double base_radius_lo = 3.8;  // px, diastolic major radius
  double base_radius_hi = 5.0;
  double ef_mean = 55.8;  // percent
  double ef_std = 12.4;
  double heart_rate_lo = 1.0;  // cycles per sequence
  double heart_rate_hi = 2.0;
  double noise_std = 0.02;
  double aspect_jitter = 0.15;
  double drift_amplitude = 0.6;  // px
  int frames = 16;
  int frame_size = 16;

  void validate() const;
};

struct VideoSample {
  std::string id;
  int frames = 16;
  int frame_size = 16;
  std::vector<float> pixels;  // T*H*W, row-major, [0,1]
  double ef_true = 0.0;       // percent
  std::string cohort;
  std::uint64_t gen_seed = 0;

  // drawn geometry, kept for oracles (not serialized)
  double radius_a = 0, radius_b = 0, systolic_scale = 1, rate = 0, phase = 0;
};

VideoSample render_sequence(const CohortSpec& spec, std::uint64_t seed);

// EF from the analytic ellipse areas: (A_dia - A_sys)/A_dia * 100.
double ef_from_radii(double r_dia_a, double r_dia_b, double r_sys_a, double r_sys_b);

struct DatasetRecord {
  std::string id;
  std::string cohort;
  std::uint64_t seed = 0;
  double ef_true = 0.0;
  std::uint64_t offset = 0;  // floats into the blob
  std::uint64_t count = 0;   // floats
  std::uint64_t checksum = 0;
};

struct DatasetManifest {
  int version = 1;
  int frames = 16;
  int frame_size = 16;
  std::string blob_file;
  std::vector<CohortSpec> cohorts;
  std::vector<DatasetRecord> records;
};

// Renders every cohort deterministically and writes manifest.json + data.bin
// under out_dir. Same seed, same bytes.
DatasetManifest generate_cohorts(const std::vector<CohortSpec>& specs, std::uint64_t seed,
                                 const std::string& out_dir);

// Lazy, ordered, validated access to a written dataset.
class DatasetReader {
 public:
  explicit DatasetReader(const std::string& manifest_path);
  const DatasetManifest& manifest() const { return manifest_; }
  std::size_t size() const { return manifest_.records.size(); }
  VideoSample read(std::size_t index) const;
  std::vector<VideoSample> read_all() const;
  std::vector<VideoSample> read_cohort(const std::string& cohort) const;

 private:
  DatasetManifest manifest_;
  std::string blob_path_;
};

DatasetManifest read_manifest(const std::string& manifest_path);

// Source cohort (adult analog, train + val) plus three shifted target
// cohorts: smaller, faster, noisier hearts.
std::vector<CohortSpec> default_cohort_specs();

std::uint64_t fnv1a64(const void* data, std::size_t bytes);

// {"cohorts": [...]} round trip for gen-data specs and config snapshots.
std::vector<CohortSpec> cohort_specs_from_json_text(const std::string& text);
std::string cohort_specs_to_json_text(const std::vector<CohortSpec>& specs);

}  // namespace qpart::synth
