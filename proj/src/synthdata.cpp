#include "qpart/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "qpart/rng.hpp"

namespace qpart::synth {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kEfLo = 20.0, kEfHi = 75.0;
}  // namespace

std::uint64_t fnv1a64(const void* data, std::size_t bytes) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

void CohortSpec::validate() const {
  if (name.empty()) throw std::invalid_argument("cohort spec: empty name");
  if (n_samples < 1) throw std::invalid_argument("cohort spec: n_samples < 1");
  if (!(base_radius_lo > 0) || base_radius_hi < base_radius_lo)
    throw std::invalid_argument("cohort spec '" + name + "': bad radius range");
  if (heart_rate_hi < heart_rate_lo || heart_rate_lo <= 0)
    throw std::invalid_argument("cohort spec '" + name + "': bad heart rate range");
  if (noise_std < 0 || aspect_jitter < 0 || drift_amplitude < 0)
    throw std::invalid_argument("cohort spec '" + name + "': negative noise/jitter/drift");
  if (frames < 2 || frame_size < 8)
    throw std::invalid_argument("cohort spec '" + name + "': frames/frame_size too small");
  const double max_r = base_radius_hi * (1.0 + aspect_jitter);
  if (max_r + drift_amplitude + 1.5 > frame_size / 2.0)
    throw std::invalid_argument("cohort spec '" + name + "': ellipse does not fit inside frame");
}

double ef_from_radii(double r_dia_a, double r_dia_b, double r_sys_a, double r_sys_b) {
  const double a_dia = kPi * r_dia_a * r_dia_b;
  const double a_sys = kPi * r_sys_a * r_sys_b;
  return (a_dia - a_sys) / a_dia * 100.0;
}

VideoSample render_sequence(const CohortSpec& spec, std::uint64_t seed) {
  spec.validate();
  // geometry and noise use separate streams so the target never depends on
  // the noise draws
  Rng geo(Rng::derive(seed, 1));
  Rng noise(Rng::derive(seed, 2));

  VideoSample s;
  s.frames = spec.frames;
  s.frame_size = spec.frame_size;
  s.cohort = spec.name;
  s.gen_seed = seed;

  const int T = spec.frames, H = spec.frame_size;
  s.radius_a = geo.uniform(spec.base_radius_lo, spec.base_radius_hi);
  s.radius_b = s.radius_a * (1.0 + geo.uniform(-spec.aspect_jitter, spec.aspect_jitter));

  double ef = 0.0;
  do {
    ef = spec.ef_mean + spec.ef_std * geo.normal();
  } while (ef < kEfLo || ef > kEfHi);
  s.systolic_scale = std::sqrt(1.0 - ef / 100.0);
  s.ef_true = ef_from_radii(s.radius_a, s.radius_b, s.radius_a * s.systolic_scale,
                            s.radius_b * s.systolic_scale);

  s.rate = geo.uniform(spec.heart_rate_lo, spec.heart_rate_hi);
  s.phase = geo.uniform(0.0, 1.0);

  const double cx0 = (H - 1) / 2.0 + geo.uniform(-0.5, 0.5);
  const double cy0 = (H - 1) / 2.0 + geo.uniform(-0.5, 0.5);
  const double f1 = geo.uniform(0.25, 0.75), f2 = geo.uniform(0.25, 0.75);
  const double p1 = geo.uniform(0.0, 2.0 * kPi), p2 = geo.uniform(0.0, 2.0 * kPi);

  s.pixels.resize(static_cast<std::size_t>(T) * H * H);
  for (int t = 0; t < T; ++t) {
    const double tau = static_cast<double>(t) / T;
    const double contraction =
        s.systolic_scale +
        (1.0 - s.systolic_scale) * (0.5 + 0.5 * std::cos(2.0 * kPi * (s.rate * tau + s.phase)));
    const double ra = s.radius_a * contraction;
    const double rb = s.radius_b * contraction;
    const double r_eff = 0.5 * (ra + rb);
    const double cx = cx0 + spec.drift_amplitude * std::sin(2.0 * kPi * f1 * tau + p1);
    const double cy = cy0 + spec.drift_amplitude * std::sin(2.0 * kPi * f2 * tau + p2);
    for (int iy = 0; iy < H; ++iy)
      for (int ix = 0; ix < H; ++ix) {
        const double dx = (ix - cx) / ra, dy = (iy - cy) / rb;
        const double rho = std::sqrt(dx * dx + dy * dy);
        double v = std::clamp(0.5 - (rho - 1.0) * r_eff, 0.0, 1.0);
        if (spec.noise_std > 0) v += spec.noise_std * noise.normal();
        s.pixels[(static_cast<std::size_t>(t) * H + iy) * H + ix] =
            static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
  }
  return s;
}

namespace {

nlohmann::ordered_json spec_to_json(const CohortSpec& c) {
  return {{"name", c.name},
          {"n_samples", c.n_samples},
          {"base_radius", {c.base_radius_lo, c.base_radius_hi}},
          {"ef_mean", c.ef_mean},
          {"ef_std", c.ef_std},
          {"heart_rate", {c.heart_rate_lo, c.heart_rate_hi}},
          {"noise_std", c.noise_std},
          {"aspect_jitter", c.aspect_jitter},
          {"drift_amplitude", c.drift_amplitude},
          {"frames", c.frames},
          {"frame_size", c.frame_size}};
}

CohortSpec spec_from_json(const nlohmann::json& j) {
  CohortSpec c;
  c.name = j.at("name").get<std::string>();
  c.n_samples = j.at("n_samples").get<int>();
  c.base_radius_lo = j.at("base_radius").at(0).get<double>();
  c.base_radius_hi = j.at("base_radius").at(1).get<double>();
  c.ef_mean = j.at("ef_mean").get<double>();
  c.ef_std = j.at("ef_std").get<double>();
  c.heart_rate_lo = j.at("heart_rate").at(0).get<double>();
  c.heart_rate_hi = j.at("heart_rate").at(1).get<double>();
  c.noise_std = j.at("noise_std").get<double>();
  c.aspect_jitter = j.at("aspect_jitter").get<double>();
  c.drift_amplitude = j.at("drift_amplitude").get<double>();
  c.frames = j.at("frames").get<int>();
  c.frame_size = j.at("frame_size").get<int>();
  return c;
}

}  // namespace

DatasetManifest generate_cohorts(const std::vector<CohortSpec>& specs, std::uint64_t seed,
                                 const std::string& out_dir) {
  if (specs.empty()) throw std::invalid_argument("generate_cohorts: no cohort specs");
  for (const auto& s : specs) s.validate();
  const int frames = specs.front().frames, frame_size = specs.front().frame_size;
  for (const auto& s : specs)
    if (s.frames != frames || s.frame_size != frame_size)
      throw std::invalid_argument("generate_cohorts: cohorts disagree on frame geometry");

  std::filesystem::create_directories(out_dir);
  const std::string blob_path = out_dir + "/data.bin";
  std::ofstream blob(blob_path, std::ios::binary | std::ios::trunc);
  if (!blob) throw std::runtime_error("generate_cohorts: cannot write " + blob_path);

  DatasetManifest m;
  m.frames = frames;
  m.frame_size = frame_size;
  m.blob_file = "data.bin";
  m.cohorts = specs;

  std::uint64_t offset = 0;
  std::uint64_t global_index = 0;
  for (const auto& spec : specs) {
    for (int i = 0; i < spec.n_samples; ++i, ++global_index) {
      const std::uint64_t sample_seed = Rng::derive(seed, global_index);
      VideoSample s = render_sequence(spec, sample_seed);
      char idbuf[16];
      std::snprintf(idbuf, sizeof(idbuf), "%04d", i);
      DatasetRecord rec;
      rec.id = spec.name + "/" + idbuf;
      rec.cohort = spec.name;
      rec.seed = sample_seed;
      rec.ef_true = s.ef_true;
      rec.offset = offset;
      rec.count = s.pixels.size();
      rec.checksum = fnv1a64(s.pixels.data(), s.pixels.size() * sizeof(float));
      blob.write(reinterpret_cast<const char*>(s.pixels.data()),
                 static_cast<std::streamsize>(s.pixels.size() * sizeof(float)));
      offset += rec.count;
      m.records.push_back(std::move(rec));
    }
  }
  blob.close();

  nlohmann::ordered_json j;
  j["version"] = m.version;
  j["frames"] = m.frames;
  j["frame_size"] = m.frame_size;
  j["blob_file"] = m.blob_file;
  j["cohorts"] = nlohmann::ordered_json::array();
  for (const auto& c : m.cohorts) j["cohorts"].push_back(spec_to_json(c));
  j["records"] = nlohmann::ordered_json::array();
  for (const auto& r : m.records)
    j["records"].push_back({{"id", r.id},
                            {"cohort", r.cohort},
                            {"seed", r.seed},
                            {"ef_true", r.ef_true},
                            {"offset", r.offset},
                            {"count", r.count},
                            {"checksum", r.checksum}});
  std::ofstream mf(out_dir + "/manifest.json", std::ios::trunc);
  if (!mf) throw std::runtime_error("generate_cohorts: cannot write manifest");
  mf << j.dump(2) << "\n";
  return m;
}

DatasetManifest read_manifest(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("dataset: cannot open " + manifest_path);
  nlohmann::json j = nlohmann::json::parse(in);
  DatasetManifest m;
  m.version = j.at("version").get<int>();
  if (m.version != 1)
    throw std::runtime_error("dataset: unsupported format version " + std::to_string(m.version));
  m.frames = j.at("frames").get<int>();
  m.frame_size = j.at("frame_size").get<int>();
  m.blob_file = j.at("blob_file").get<std::string>();
  for (const auto& c : j.at("cohorts")) m.cohorts.push_back(spec_from_json(c));
  std::uint64_t prev_end = 0;
  for (const auto& r : j.at("records")) {
    DatasetRecord rec;
    rec.id = r.at("id").get<std::string>();
    rec.cohort = r.at("cohort").get<std::string>();
    rec.seed = r.at("seed").get<std::uint64_t>();
    rec.ef_true = r.at("ef_true").get<double>();
    rec.offset = r.at("offset").get<std::uint64_t>();
    rec.count = r.at("count").get<std::uint64_t>();
    rec.checksum = r.at("checksum").get<std::uint64_t>();
    if (rec.offset < prev_end)
      throw std::runtime_error("dataset: overlapping offsets at record " + rec.id);
    prev_end = rec.offset + rec.count;
    m.records.push_back(std::move(rec));
  }
  return m;
}

DatasetReader::DatasetReader(const std::string& manifest_path)
    : manifest_(read_manifest(manifest_path)) {
  const auto dir = std::filesystem::path(manifest_path).parent_path();
  blob_path_ = (dir / manifest_.blob_file).string();
  const auto expected =
      static_cast<std::uintmax_t>(manifest_.records.empty()
                                      ? 0
                                      : (manifest_.records.back().offset +
                                         manifest_.records.back().count) *
                                            sizeof(float));
  if (std::filesystem::file_size(blob_path_) < expected)
    throw std::runtime_error("dataset: blob shorter than manifest records");
}

VideoSample DatasetReader::read(std::size_t index) const {
  const DatasetRecord& rec = manifest_.records.at(index);
  const std::size_t want = static_cast<std::size_t>(manifest_.frames) * manifest_.frame_size *
                           manifest_.frame_size;
  if (rec.count != want)
    throw std::runtime_error("dataset: record " + rec.id + " has wrong frame count");
  std::ifstream blob(blob_path_, std::ios::binary);
  if (!blob) throw std::runtime_error("dataset: cannot open blob " + blob_path_);
  blob.seekg(static_cast<std::streamoff>(rec.offset * sizeof(float)));
  VideoSample s;
  s.id = rec.id;
  s.cohort = rec.cohort;
  s.gen_seed = rec.seed;
  s.ef_true = rec.ef_true;
  s.frames = manifest_.frames;
  s.frame_size = manifest_.frame_size;
  s.pixels.resize(rec.count);
  blob.read(reinterpret_cast<char*>(s.pixels.data()),
            static_cast<std::streamsize>(rec.count * sizeof(float)));
  if (!blob) throw std::runtime_error("dataset: short read at record " + rec.id);
  if (fnv1a64(s.pixels.data(), s.pixels.size() * sizeof(float)) != rec.checksum)
    throw std::runtime_error("dataset: checksum mismatch at record " + rec.id);
  return s;
}

std::vector<VideoSample> DatasetReader::read_all() const {
  std::vector<VideoSample> out;
  out.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) out.push_back(read(i));
  return out;
}

std::vector<VideoSample> DatasetReader::read_cohort(const std::string& cohort) const {
  std::vector<VideoSample> out;
  for (std::size_t i = 0; i < size(); ++i)
    if (manifest_.records[i].cohort == cohort) out.push_back(read(i));
  if (out.empty()) throw std::runtime_error("dataset: no samples in cohort '" + cohort + "'");
  return out;
}

std::vector<CohortSpec> cohort_specs_from_json_text(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  std::vector<CohortSpec> specs;
  for (const auto& c : j.at("cohorts")) specs.push_back(spec_from_json(c));
  for (const auto& s : specs) s.validate();
  return specs;
}

std::string cohort_specs_to_json_text(const std::vector<CohortSpec>& specs) {
  nlohmann::ordered_json j;
  j["cohorts"] = nlohmann::ordered_json::array();
  for (const auto& c : specs) j["cohorts"].push_back(spec_to_json(c));
  return j.dump(2);
}

std::vector<CohortSpec> default_cohort_specs() {
  CohortSpec train;
  train.name = "source_train";
  train.n_samples = 512;
  train.base_radius_lo = 3.8;
  train.base_radius_hi = 5.0;
  train.ef_mean = 55.8;
  train.ef_std = 12.4;
  train.heart_rate_lo = 1.0;
  train.heart_rate_hi = 2.0;
  train.noise_std = 0.02;
  train.aspect_jitter = 0.15;
  train.drift_amplitude = 0.6;

  CohortSpec val = train;
  val.name = "source_val";
  val.n_samples = 128;

  // pediatric analogs: smaller, faster, noisier hearts
  CohortSpec preschool = train;
  preschool.name = "preschool_analog";
  preschool.n_samples = 128;
  preschool.base_radius_lo = 2.4;
  preschool.base_radius_hi = 3.4;
  preschool.ef_mean = 59.6;
  preschool.ef_std = 12.8;
  preschool.heart_rate_lo = 2.0;
  preschool.heart_rate_hi = 3.5;
  preschool.noise_std = 0.04;
  preschool.aspect_jitter = 0.25;
  preschool.drift_amplitude = 1.0;

  CohortSpec schoolage = train;
  schoolage.name = "schoolage_analog";
  schoolage.n_samples = 128;
  schoolage.base_radius_lo = 2.8;
  schoolage.base_radius_hi = 3.8;
  schoolage.ef_mean = 62.0;
  schoolage.ef_std = 9.2;
  schoolage.heart_rate_lo = 1.8;
  schoolage.heart_rate_hi = 3.0;
  schoolage.noise_std = 0.035;
  schoolage.aspect_jitter = 0.2;
  schoolage.drift_amplitude = 0.9;

  CohortSpec adolescent = train;
  adolescent.name = "adolescent_analog";
  adolescent.n_samples = 128;
  adolescent.base_radius_lo = 3.2;
  adolescent.base_radius_hi = 4.2;
  adolescent.ef_mean = 61.0;
  adolescent.ef_std = 9.8;
  adolescent.heart_rate_lo = 1.4;
  adolescent.heart_rate_hi = 2.5;
  adolescent.noise_std = 0.03;
  adolescent.aspect_jitter = 0.18;
  adolescent.drift_amplitude = 0.8;

  return {train, val, preschool, schoolage, adolescent};
}

}  // namespace qpart::synth
