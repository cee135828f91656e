#include "qpart/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace qpart::qpnet {

namespace {

std::string strip_suffix(const std::string& prefix) {
  for (const char* suf : {".json", ".bin"}) {
    const std::string s(suf);
    if (prefix.size() > s.size() && prefix.compare(prefix.size() - s.size(), s.size(), s) == 0)
      return prefix.substr(0, prefix.size() - s.size());
  }
  return prefix;
}

struct Entry {
  std::string name;
  std::string kind;  // "param" | "buffer"
  std::string group;
  diff::Shape shape;
  std::vector<float>* data;
};

std::vector<Entry> entries(Model& m) {
  std::vector<Entry> out;
  nn::StateVisitor<float> v;
  v.param = [&](diff::ParamT<float>& p) {
    out.push_back({p.name, "param", diff::group_name(p.group), p.shape, p.value.get()});
  };
  v.buffer = [&](const std::string& name, std::vector<float>& buf) {
    out.push_back({name, "buffer", "", {static_cast<int>(buf.size())}, &buf});
  };
  m.visit(v);
  return out;
}

nlohmann::ordered_json config_to_json(const ModelConfig& c) {
  return {{"frames", c.frames},
          {"frame_size", c.frame_size},
          {"latent_channels", c.latent_channels},
          {"latent_size", c.latent_size},
          {"enc_hidden", c.enc_hidden},
          {"field_hidden", c.field_hidden},
          {"reg_hidden", c.reg_hidden},
          {"substeps", c.substeps}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.frames = j.at("frames").get<int>();
  c.frame_size = j.at("frame_size").get<int>();
  c.latent_channels = j.at("latent_channels").get<int>();
  c.latent_size = j.at("latent_size").get<int>();
  c.enc_hidden = j.at("enc_hidden").get<int>();
  c.field_hidden = j.at("field_hidden").get<int>();
  c.reg_hidden = j.at("reg_hidden").get<int>();
  c.substeps = j.at("substeps").get<int>();
  return c;
}

}  // namespace

std::string checkpoint_manifest_path(const std::string& prefix) {
  return strip_suffix(prefix) + ".json";
}

std::string checkpoint_blob_path(const std::string& prefix) {
  return strip_suffix(prefix) + ".bin";
}

ModelState dump_state(Model& m) {
  ModelState st;
  for (const Entry& e : entries(m))
    st.values.insert(st.values.end(), e.data->begin(), e.data->end());
  return st;
}

void load_state(Model& m, const ModelState& st) {
  std::size_t pos = 0;
  for (const Entry& e : entries(m)) {
    if (pos + e.data->size() > st.values.size())
      throw std::runtime_error("load_state: snapshot too short");
    std::copy_n(st.values.begin() + pos, e.data->size(), e.data->begin());
    pos += e.data->size();
  }
  if (pos != st.values.size()) throw std::runtime_error("load_state: snapshot size mismatch");
  for (auto* p : m.params()) {
    p->zero_grad();
    std::fill(p->momentum.begin(), p->momentum.end(), 0.f);
  }
}

void save_checkpoint(Model& m, const std::string& prefix) {
  nlohmann::ordered_json j;
  j["format"] = "qpart-checkpoint";
  j["version"] = 1;
  j["little_endian"] = true;
  j["seed"] = m.init_seed;
  j["config"] = config_to_json(m.cfg);
  j["tensors"] = nlohmann::ordered_json::array();

  std::ofstream blob(checkpoint_blob_path(prefix), std::ios::binary | std::ios::trunc);
  if (!blob)
    throw std::runtime_error("checkpoint: cannot write " + checkpoint_blob_path(prefix));
  std::uint64_t offset = 0;
  for (const Entry& e : entries(m)) {
    nlohmann::ordered_json t;
    t["name"] = e.name;
    t["kind"] = e.kind;
    if (!e.group.empty()) t["group"] = e.group;
    t["shape"] = e.shape;
    t["offset"] = offset;
    t["count"] = e.data->size();
    j["tensors"].push_back(t);
    blob.write(reinterpret_cast<const char*>(e.data->data()),
               static_cast<std::streamsize>(e.data->size() * sizeof(float)));
    offset += e.data->size();
  }
  std::ofstream mf(checkpoint_manifest_path(prefix), std::ios::trunc);
  if (!mf)
    throw std::runtime_error("checkpoint: cannot write " + checkpoint_manifest_path(prefix));
  mf << j.dump(2) << "\n";
}

Model load_checkpoint(const std::string& prefix) {
  std::ifstream mf(checkpoint_manifest_path(prefix));
  if (!mf)
    throw std::runtime_error("checkpoint: cannot open " + checkpoint_manifest_path(prefix));
  nlohmann::json j = nlohmann::json::parse(mf);
  if (j.at("format").get<std::string>() != "qpart-checkpoint" || j.at("version").get<int>() != 1)
    throw std::runtime_error("checkpoint: unsupported format");
  Model m(config_from_json(j.at("config")), j.at("seed").get<std::uint64_t>());

  std::ifstream blob(checkpoint_blob_path(prefix), std::ios::binary);
  if (!blob)
    throw std::runtime_error("checkpoint: cannot open " + checkpoint_blob_path(prefix));
  auto ents = entries(m);
  const auto& tensors = j.at("tensors");
  if (tensors.size() != ents.size())
    throw std::runtime_error("checkpoint: tensor count mismatch");
  for (std::size_t i = 0; i < ents.size(); ++i) {
    const auto& t = tensors.at(i);
    if (t.at("name").get<std::string>() != ents[i].name ||
        t.at("count").get<std::uint64_t>() != ents[i].data->size())
      throw std::runtime_error("checkpoint: tensor mismatch at '" + ents[i].name + "'");
    if (ents[i].kind == "param" && t.at("group").get<std::string>() != ents[i].group)
      throw std::runtime_error("checkpoint: group mismatch at '" + ents[i].name + "'");
    blob.seekg(static_cast<std::streamoff>(t.at("offset").get<std::uint64_t>() * sizeof(float)));
    blob.read(reinterpret_cast<char*>(ents[i].data->data()),
              static_cast<std::streamsize>(ents[i].data->size() * sizeof(float)));
    if (!blob) throw std::runtime_error("checkpoint: short read at '" + ents[i].name + "'");
  }
  return m;
}

}  // namespace qpart::qpnet
