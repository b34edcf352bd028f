#include "genviews/training/trainer.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <sstream>
#include <thread>

#include "genviews/io/blob.hpp"
#include "genviews/objectives/losses.hpp"

namespace genviews::training {

using nlohmann::json;
using sampling::Scheme;

int worker_threads() {
  if (const char* env = std::getenv("GENVIEWS_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? int(hw) : 1;
}

namespace {

constexpr int kChunks = 8;

struct ChunkRange {
  int begin, end;
};

std::vector<ChunkRange> chunk_ranges(int n) {
  const int chunks = std::min(kChunks, n);
  std::vector<ChunkRange> out;
  for (int c = 0; c < chunks; ++c)
    out.push_back({c * n / chunks, (c + 1) * n / chunks});
  return out;
}

// Runs fn(chunk_index) over all chunks on the worker pool. Chunk results must
// be written to disjoint storage; reductions happen after the join, in chunk
// order, so results do not depend on the thread count.
void parallel_chunks(int n_chunks, const std::function<void(int)>& fn) {
  const int threads = std::min(worker_threads(), n_chunks);
  if (threads <= 1) {
    for (int c = 0; c < n_chunks; ++c) fn(c);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(std::size_t(threads));
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (;;) {
        const int c = next.fetch_add(1);
        if (c >= n_chunks) return;
        fn(c);
      }
    });
  for (auto& th : pool) th.join();
}

struct ForwardResult {
  MatXf outputs;           // embeddings / features per column
  MatXf aux;               // aux logits (conditional inverter)
  std::vector<nn::EncoderNetF::Cache> caches;
  std::vector<ChunkRange> ranges;
};

enum class OutKind { embedding, features_out_head, features_out_aux };

ForwardResult forward_parallel(const nn::EncoderNetF& net, const MatXf& images, OutKind kind) {
  ForwardResult fr;
  fr.ranges = chunk_ranges(int(images.cols()));
  fr.caches.resize(fr.ranges.size());
  int out_rows = 0;
  switch (kind) {
    case OutKind::embedding: out_rows = net.config().embed_dim; break;
    default: out_rows = int(net.head().out_dim); break;
  }
  fr.outputs.resize(out_rows, images.cols());
  if (kind == OutKind::features_out_aux) fr.aux.resize(net.head().aux_dim, images.cols());

  parallel_chunks(int(fr.ranges.size()), [&](int c) {
    const auto [begin, end] = fr.ranges[std::size_t(c)];
    const MatXf chunk = images.middleCols(begin, end - begin);
    auto& cache = fr.caches[std::size_t(c)];
    net.forward_features(chunk, cache);
    if (kind == OutKind::embedding) {
      net.forward_embedding(cache);
      fr.outputs.middleCols(begin, end - begin) = cache.emb;
    } else {
      MatXf out;
      net.forward_out(cache, out);
      fr.outputs.middleCols(begin, end - begin) = out;
      if (kind == OutKind::features_out_aux) {
        MatXf aux;
        net.forward_aux(cache, aux);
        fr.aux.middleCols(begin, end - begin) = aux;
      }
    }
  });
  return fr;
}

VecXf backward_parallel(nn::EncoderNetF& net, ForwardResult& fr, const MatXf& d_out,
                        const MatXf* d_aux, OutKind kind) {
  std::vector<nn::EncoderNetF::Grads> grads(fr.ranges.size());
  parallel_chunks(int(fr.ranges.size()), [&](int c) {
    const auto [begin, end] = fr.ranges[std::size_t(c)];
    grads[std::size_t(c)] = net.make_grads();
    const MatXf d_chunk = d_out.middleCols(begin, end - begin);
    auto& cache = fr.caches[std::size_t(c)];
    if (kind == OutKind::embedding) {
      net.backward_embedding(d_chunk, cache, grads[std::size_t(c)]);
    } else if (kind == OutKind::features_out_aux) {
      const MatXf da = d_aux->middleCols(begin, end - begin);
      net.backward_out(d_chunk, &da, cache, grads[std::size_t(c)]);
    } else {
      net.backward_out(d_chunk, nullptr, cache, grads[std::size_t(c)]);
    }
  });
  // fixed-order reduction
  VecXf total = nn::flatten_grads<nn::EncoderNetF, float>(net, grads[0]);
  for (std::size_t c = 1; c < grads.size(); ++c)
    total += nn::flatten_grads<nn::EncoderNetF, float>(net, grads[c]);
  return total;
}

std::vector<ClassLabel> duplicated(const std::vector<ClassLabel>& labels) {
  std::vector<ClassLabel> out = labels;
  out.insert(out.end(), labels.begin(), labels.end());
  return out;
}

}  // namespace

void Checkpoint::save(const std::string& path) const {
  json header;
  header["kind"] = "checkpoint";
  header["encoder"] = {{"stage_widths", encoder.stage_widths},
                       {"stage_blocks", encoder.stage_blocks},
                       {"gn_groups", encoder.gn_groups},
                       {"proj_hidden", encoder.proj_hidden},
                       {"embed_dim", encoder.embed_dim},
                       {"input", {encoder.in_h, encoder.in_w, encoder.in_c}}};
  header["head"] = {{"kind", int(head.kind)}, {"out_dim", head.out_dim}, {"aux_dim", head.aux_dim}};
  header["config_hash"] = config_hash;
  header["iteration"] = iteration;
  header["rng_state"] = rng_state;
  std::string payload(reinterpret_cast<const char*>(params.data()),
                      std::size_t(params.size()) * sizeof(float));
  io::write_blob(path, header.dump(), payload);
}

Checkpoint Checkpoint::load(const std::string& path) {
  const io::Blob blob = io::read_blob(path);
  const json header = json::parse(blob.header_json);
  if (header.at("kind") != "checkpoint") throw IoError("not an encoder checkpoint: " + path);
  Checkpoint c;
  c.encoder.stage_widths = header.at("encoder").at("stage_widths").get<std::vector<int>>();
  c.encoder.stage_blocks = header.at("encoder").at("stage_blocks").get<std::vector<int>>();
  c.encoder.gn_groups = header.at("encoder").at("gn_groups").get<int>();
  c.encoder.proj_hidden = header.at("encoder").at("proj_hidden").get<int>();
  c.encoder.embed_dim = header.at("encoder").at("embed_dim").get<int>();
  auto in = header.at("encoder").at("input").get<std::vector<int>>();
  c.encoder.in_h = in.at(0);
  c.encoder.in_w = in.at(1);
  c.encoder.in_c = in.at(2);
  c.head.kind = nn::HeadKind(header.at("head").at("kind").get<int>());
  c.head.out_dim = header.at("head").at("out_dim").get<int>();
  c.head.aux_dim = header.at("head").at("aux_dim").get<int>();
  c.config_hash = header.at("config_hash").get<std::string>();
  c.iteration = header.at("iteration").get<long>();
  c.rng_state = header.at("rng_state").get<std::string>();
  c.params.resize(Eigen::Index(blob.payload.size() / sizeof(float)));
  std::memcpy(c.params.data(), blob.payload.data(), blob.payload.size());
  return c;
}

nn::EncoderNetF Checkpoint::instantiate() const {
  Rng rng(0);
  nn::EncoderNetF net(encoder, head, rng);
  net.set_params(params);
  return net;
}

EmbeddingBatch embed(const nn::EncoderNetF& net, const ImageBatch& images, bool use_head) {
  if (images.h != net.config().in_h || images.w != net.config().in_w ||
      images.c != net.config().in_c)
    throw ContractError("embed: image shape does not match encoder input");
  if (use_head && net.head().kind != nn::HeadKind::projection)
    throw ContractError("embed: this checkpoint has no projection head");

  const auto ranges = chunk_ranges(images.n);
  EmbeddingBatch out;
  out.normalized = use_head;
  out.vectors.resize(use_head ? net.config().embed_dim : net.config().feature_dim(), images.n);
  std::vector<nn::EncoderNetF::Cache> caches(ranges.size());
  parallel_chunks(int(ranges.size()), [&](int c) {
    const auto [begin, end] = ranges[std::size_t(c)];
    auto& cache = caches[std::size_t(c)];
    net.forward_features(images.data.middleCols(begin, end - begin), cache);
    if (use_head) {
      net.forward_embedding(cache);
      out.vectors.middleCols(begin, end - begin) = cache.emb;
    } else {
      out.vectors.middleCols(begin, end - begin) = cache.feat;
    }
  });
  return out;
}

TrainOutput train_encoder(sampling::BatchSampler& sampler, const nn::EncoderConfig& enc_cfg,
                          const TrainConfig& train_cfg, const std::string& config_hash,
                          const std::function<void(long, const Checkpoint&)>& epoch_hook) {
  train_cfg.validate();
  enc_cfg.validate();
  if (train_cfg.batch != sampler.batch_size())
    throw ConfigError("train: batch size disagrees with sampler");

  const Scheme scheme = sampler.scheme();
  const long steps_per_epoch = std::max(1L, long(sampler.pool_size() / train_cfg.batch));
  const long total_steps =
      train_cfg.iterations > 0 ? train_cfg.iterations : long(train_cfg.epochs) * steps_per_epoch;

  nn::HeadSpec head;
  const bool contrastive = scheme == Scheme::simclr || scheme == Scheme::supcon ||
                           scheme == Scheme::igm_contrastive || scheme == Scheme::igm_supcon;
  const bool supervised_contrastive = scheme == Scheme::supcon || scheme == Scheme::igm_supcon;
  if (contrastive) {
    head.kind = nn::HeadKind::projection;
  } else if (scheme == Scheme::inverter) {
    // conditional inverters carry an auxiliary classifier
    head.out_dim = 0;  // set below from the first batch
  } else {
    head.kind = nn::HeadKind::classifier;
  }

  Rng init_rng(splitmix64(train_cfg.seed ^ 0xabcd1234u));

  // Non-contrastive head dims come from the source.
  if (scheme == Scheme::inverter) {
    head.out_dim = sampler.source_latent_dim();
    if (sampler.source_conditional()) {
      head.kind = nn::HeadKind::regression_aux;
      head.aux_dim = sampler.source_num_classes();
    } else {
      head.kind = nn::HeadKind::regression;
    }
  } else if (scheme == Scheme::classifier) {
    head.out_dim = sampler.source_num_classes();
  }

  nn::EncoderNetF net(enc_cfg, head, init_rng);
  VecXf theta = net.flatten_params();
  const VecXf decay_mask = nn::weight_decay_mask<nn::EncoderNetF, float>(net);
  nn::SgdMomentum<float> sgd;
  sgd.momentum = train_cfg.momentum;
  sgd.weight_decay = train_cfg.weight_decay;

  TrainOutput out;
  const auto t0 = std::chrono::steady_clock::now();
  const auto wall = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  const auto snapshot = [&](long iter) {
    Checkpoint c;
    c.encoder = enc_cfg;
    c.head = head;
    c.params = theta;
    c.config_hash = config_hash;
    c.iteration = iter;
    std::ostringstream ss;
    ss << init_rng.engine();
    c.rng_state = ss.str();
    return c;
  };

  if (scheme == Scheme::inverter && head.kind == nn::HeadKind::regression_aux &&
      head.aux_dim < 2)
    throw ConfigError("train: conditional inverter needs >= 2 classes");

  for (long step = 0; step < total_steps; ++step) {
    const double lr =
        train_cfg.cosine ? nn::cosine_lr(train_cfg.lr, step, total_steps) : train_cfg.lr;
    double loss = 0.0;
    VecXf grad;

    if (contrastive) {
      sampling::ContrastiveBatch batch = sampler.next_contrastive();
      const int b = batch.anchors.n;
      MatXf both(batch.anchors.data.rows(), 2 * b);
      both.leftCols(b) = batch.anchors.data;
      both.rightCols(b) = batch.positives.data;
      ForwardResult fr = forward_parallel(net, both, OutKind::embedding);
      MatXf d_emb(fr.outputs.rows(), fr.outputs.cols());
      if (supervised_contrastive) {
        const auto labels2 = duplicated(batch.labels);
        auto res = objectives::supcon_loss<float>(fr.outputs, labels2, float(train_cfg.tau));
        loss = res.value;
        d_emb = res.d_embeddings;
      } else {
        auto res = objectives::nce_batch_loss<float>(fr.outputs.leftCols(b),
                                                     fr.outputs.rightCols(b),
                                                     float(train_cfg.tau));
        loss = res.value;
        d_emb.leftCols(b) = res.d_anchors;
        d_emb.rightCols(b) = res.d_positives;
      }
      grad = backward_parallel(net, fr, d_emb, nullptr, OutKind::embedding);
    } else if (scheme == Scheme::inverter) {
      sampling::InverterBatch batch = sampler.next_inverter();
      const bool aux = head.kind == nn::HeadKind::regression_aux;
      ForwardResult fr = forward_parallel(
          net, batch.images.data, aux ? OutKind::features_out_aux : OutKind::features_out_head);
      auto res = objectives::inverter_loss<float>(fr.outputs, batch.true_z,
                                                  aux ? &fr.aux : nullptr,
                                                  aux ? &batch.labels : nullptr,
                                                  float(train_cfg.ce_weight));
      loss = res.value;
      grad = backward_parallel(net, fr, res.d_pred, aux ? &res.d_logits : nullptr,
                               aux ? OutKind::features_out_aux : OutKind::features_out_head);
    } else {
      sampling::InverterBatch batch = sampler.next_classifier();
      ForwardResult fr = forward_parallel(net, batch.images.data, OutKind::features_out_head);
      auto res = objectives::classifier_loss<float>(fr.outputs, batch.labels);
      loss = res.value;
      grad = backward_parallel(net, fr, res.d_logits, nullptr, OutKind::features_out_head);
    }

    if (!std::isfinite(loss))
      throw TrainingError("train: non-finite loss at step " + std::to_string(step) +
                              " (lr=" + std::to_string(lr) + ")",
                          step);

    sgd.step(theta, grad, decay_mask, lr);
    net.set_params(theta);
    out.metrics.push_back({step, loss, lr, wall()});

    if (epoch_hook && (step + 1) % steps_per_epoch == 0) epoch_hook(step + 1, snapshot(step + 1));
  }

  out.checkpoint = snapshot(total_steps);
  out.anchors_consumed = total_steps * train_cfg.batch;
  return out;
}

}  // namespace genviews::training
