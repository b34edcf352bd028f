#include "genviews/igm/generator.hpp"

#include <nlohmann/json.hpp>

#include "genviews/igm/learned.hpp"
#include "genviews/igm/procedural.hpp"
#include "genviews/io/blob.hpp"

namespace genviews::igm {

using nlohmann::json;

std::string to_string(Backend b) { return b == Backend::procedural ? "procedural" : "learned"; }

Backend backend_from_string(const std::string& s) {
  if (s == "procedural") return Backend::procedural;
  if (s == "learned") return Backend::learned;
  throw InvalidSpecError("unknown backend: " + s);
}

namespace {

json spec_to_json(const GeneratorSpec& s) {
  json j;
  j["backend"] = to_string(s.backend);
  j["latent_dim"] = s.latent_dim;
  j["conditional"] = s.conditional;
  if (s.conditional) j["num_classes"] = s.num_classes;
  j["image_shape"] = {s.height, s.width, s.channels};
  j["default_prior"] = {{"mu", std::vector<double>(s.default_prior.mu.data(),
                                                   s.default_prior.mu.data() + s.default_prior.dim())},
                        {"sigma", std::vector<double>(s.default_prior.sigma.data(),
                                                      s.default_prior.sigma.data() + s.default_prior.dim())},
                        {"t", s.default_prior.t}};
  return j;
}

GeneratorSpec spec_from_json(const json& j) {
  GeneratorSpec s;
  s.backend = backend_from_string(j.at("backend").get<std::string>());
  s.latent_dim = j.at("latent_dim").get<int>();
  s.conditional = j.at("conditional").get<bool>();
  s.num_classes = s.conditional ? j.at("num_classes").get<int>() : 10;
  auto shape = j.at("image_shape").get<std::vector<int>>();
  s.height = shape.at(0);
  s.width = shape.at(1);
  s.channels = shape.at(2);
  auto mu = j.at("default_prior").at("mu").get<std::vector<double>>();
  auto sg = j.at("default_prior").at("sigma").get<std::vector<double>>();
  s.default_prior.mu = Eigen::Map<VecXd>(mu.data(), Eigen::Index(mu.size()));
  s.default_prior.sigma = Eigen::Map<VecXd>(sg.data(), Eigen::Index(sg.size()));
  s.default_prior.t = j.at("default_prior").at("t").get<double>();
  return s;
}

}  // namespace

ImageBatch Generator::generate(const LatentBatch& z, const std::vector<ClassLabel>* labels) const {
  if (z.rows() != spec_.latent_dim)
    throw ContractError("generate: latent dimension mismatch");
  if (z.cols() < 1) throw ContractError("generate: empty latent batch");
  if (!z.allFinite()) throw ContractError("generate: non-finite latents");
  if (spec_.conditional) {
    if (!labels) throw ContractError("generate: conditional generator requires labels");
    if (Eigen::Index(labels->size()) != z.cols())
      throw ContractError("generate: label count mismatch");
    for (ClassLabel y : *labels)
      if (y < 0 || y >= spec_.num_classes) throw ContractError("generate: label out of range");
  } else if (labels) {
    throw ContractError("generate: unconditional generator takes no labels");
  }

  ImageBatch out(int(z.cols()), spec_.height, spec_.width, spec_.channels);
  for (int i = 0; i < out.n; ++i)
    render(z.col(i), labels ? (*labels)[std::size_t(i)] : 0, out, i);
  return out;
}

ImageBatch Generator::generate_one(const LatentVector& z, std::optional<ClassLabel> y) const {
  LatentBatch zb = z;
  if (y) {
    std::vector<ClassLabel> labels{*y};
    return generate(zb, &labels);
  }
  return generate(zb, nullptr);
}

void Generator::save(const std::string& path) const {
  json header;
  header["kind"] = "generator";
  header["spec"] = spec_to_json(spec_);
  header["metadata"] = json::parse(metadata_json_);
  io::write_blob(path, header.dump(), payload_bytes());
}

std::shared_ptr<Generator> Generator::load(const std::string& path) {
  const io::Blob blob = io::read_blob(path);
  const json header = json::parse(blob.header_json);
  if (header.at("kind") != "generator") throw IoError("not a generator checkpoint: " + path);
  const GeneratorSpec spec = spec_from_json(header.at("spec"));
  std::shared_ptr<Generator> g;
  if (spec.backend == Backend::procedural) {
    g = std::make_shared<ProceduralGenerator>(spec);
  } else {
    g = make_learned_from_payload(spec, blob.payload);
  }
  g->metadata_json_ = header.at("metadata").dump();
  return g;
}

std::shared_ptr<Generator> make_procedural_generator(const GeneratorSpec& spec) {
  return std::make_shared<ProceduralGenerator>(spec);
}

}  // namespace genviews::igm
