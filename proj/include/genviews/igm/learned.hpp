#pragma once

#include "genviews/igm/generator.hpp"
#include "genviews/nn/layers.hpp"

namespace genviews::igm {

struct LearnedFitConfig {
  int latent_dim = 16;
  int epochs = 30;
  int batch = 64;
  double lr = 2e-3;
  double noise_std = 0.1;     // code-space noise injected during training
  double prior_weight = 0.1;  // pulls code second moment toward the prior's
  std::uint64_t seed = 0;
};

// Decoder-as-generator handle produced by fit_learned_igm. The paired encoder
// is kept only for reconstruction reporting.
class LearnedGenerator final : public Generator {
 public:
  struct Net {
    // encoder: conv s2, conv s2, fc -> code
    nn::Conv2d<float> enc_c1, enc_c2;
    nn::Linear<float> enc_fc;
    // decoder: fc -> (base_ch, h/4, w/4), up, conv, up, conv, conv -> sigmoid
    nn::Linear<float> dec_fc;
    nn::Conv2d<float> dec_c1, dec_c2, dec_c3;
    int h = 0, w = 0, code = 0, cond = 0;
    static constexpr int kBase = 32, kMid = 24, kNarrow = 16;

    void build(int h_, int w_, int code_, int cond_, Rng& rng);
    VecXf decode(const VecXf& code_and_cond) const;
    VecXf encode(const VecXf& image) const;
  };

  LearnedGenerator(GeneratorSpec spec, Net net, std::string metadata_json);

  std::optional<ClassLabel> true_class(const LatentVector&, std::optional<ClassLabel> y) const override {
    return spec_.conditional ? y : std::optional<ClassLabel>{};
  }

  // Mean absolute reconstruction error of encode-decode on a batch.
  double reconstruction_mae(const ImageBatch& images, const std::vector<ClassLabel>* labels) const;

  const Net& net() const { return net_; }

 protected:
  void render(const LatentVector& z, ClassLabel y, ImageBatch& out, int slot) const override;
  std::string payload_bytes() const override;

 private:
  Net net_;
};

// [OP] fit_learned_igm: fits a decoder to a fixed image set by autoencoding
// with code noise and a prior-moment penalty, then exposes the decoder under
// the generate() contract. Held-out reconstruction error is recorded in the
// handle metadata.
std::shared_ptr<Generator> fit_learned_igm(const ImageBatch& dataset,
                                           const std::vector<ClassLabel>* labels,
                                           const LearnedFitConfig& config, Rng& rng);

// Untrained baseline with the same architecture (for fidelity comparisons).
std::shared_ptr<Generator> make_untrained_learned_igm(int h, int w, const LearnedFitConfig& config,
                                                      Rng& rng);

std::shared_ptr<Generator> make_learned_from_payload(const GeneratorSpec& spec,
                                                     const std::string& payload);

}  // namespace genviews::igm
