#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "genviews/igm/truncated_normal.hpp"

namespace genviews::igm {

enum class Backend { procedural, learned };

std::string to_string(Backend b);
Backend backend_from_string(const std::string& s);

struct GeneratorSpec {
  Backend backend = Backend::procedural;
  int latent_dim = 9;
  bool conditional = false;
  int num_classes = 10;  // meaningful iff conditional (procedural also bins one dim when unconditional)
  int height = 32, width = 32, channels = 3;
  TruncatedNormalSpec default_prior;

  void validate() const {
    if (latent_dim < 1) throw InvalidSpecError("generator: latent_dim < 1");
    if (conditional && num_classes < 2) throw InvalidSpecError("generator: conditional needs >= 2 classes");
    if (height < 8 || width < 8 || channels < 1)
      throw InvalidSpecError("generator: image shape components too small");
    default_prior.validate();
    if (default_prior.dim() != latent_dim)
      throw InvalidSpecError("generator: prior dimension != latent_dim");
  }
};

// Black-box implicit generative model: sampling access only. generate() is a
// pure function of (handle, z, y); handles are immutable once built and safe
// to share across threads.
class Generator {
 public:
  virtual ~Generator() = default;

  const GeneratorSpec& spec() const { return spec_; }

  // labels must be given iff the generator is conditional (contract error otherwise).
  ImageBatch generate(const LatentBatch& z, const std::vector<ClassLabel>* labels = nullptr) const;

  ImageBatch generate_one(const LatentVector& z, std::optional<ClassLabel> y = std::nullopt) const;

  // Ground-truth semantic class of a sample, when the backend knows one
  // (procedural: the rendered shape id). nullopt when unavailable.
  virtual std::optional<ClassLabel> true_class(const LatentVector& z,
                                               std::optional<ClassLabel> y) const = 0;

  // Free-form metadata (fit reports etc.), serialized with the handle.
  const std::string& metadata_json() const { return metadata_json_; }

  void save(const std::string& path) const;
  static std::shared_ptr<Generator> load(const std::string& path);

 protected:
  explicit Generator(GeneratorSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

  virtual void render(const LatentVector& z, ClassLabel y, ImageBatch& out, int slot) const = 0;
  virtual std::string payload_bytes() const { return {}; }

  GeneratorSpec spec_;
  std::string metadata_json_ = "{}";
};

std::shared_ptr<Generator> make_procedural_generator(const GeneratorSpec& spec);

}  // namespace genviews::igm
