#include "genviews/igm/dataset_cache.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "genviews/io/png.hpp"

namespace genviews::igm {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {
std::string image_id(int i) {
  std::ostringstream ss;
  ss << std::setw(6) << std::setfill('0') << i;
  return ss.str();
}
}  // namespace

void write_dataset_cache(const std::string& dir, const DatasetCache& cache) {
  fs::create_directories(fs::path(dir) / "images");
  std::ofstream meta(fs::path(dir) / "metadata.jsonl", std::ios::trunc);
  if (!meta) throw IoError("cannot write metadata in " + dir);
  for (int i = 0; i < cache.size(); ++i) {
    const std::string id = image_id(i);
    io::save_image_png((fs::path(dir) / "images" / (id + ".png")).string(), cache.images, i);
    json rec;
    rec["id"] = id;
    if (cache.latents.cols() > i) {
      std::vector<float> z(cache.latents.col(i).data(),
                           cache.latents.col(i).data() + cache.latents.rows());
      rec["z"] = z;
    } else {
      rec["z"] = json::array();
    }
    rec["y"] = cache.labels[std::size_t(i)] ? json(*cache.labels[std::size_t(i)]) : json(nullptr);
    rec["backend"] = cache.backend;
    rec["seed"] = cache.seed;
    meta << rec.dump() << "\n";
  }
}

DatasetCache read_dataset_cache(const std::string& dir) {
  std::ifstream meta(fs::path(dir) / "metadata.jsonl");
  if (!meta) throw IoError("cannot read metadata in " + dir);
  std::vector<json> records;
  std::string line;
  while (std::getline(meta, line)) {
    if (!line.empty()) records.push_back(json::parse(line));
  }
  if (records.empty()) throw IoError("empty dataset cache: " + dir);

  DatasetCache cache;
  cache.backend = records[0].at("backend").get<std::string>();
  cache.seed = records[0].at("seed").get<std::uint64_t>();
  const auto first =
      io::read_png_rgb8((fs::path(dir) / "images" / (records[0].at("id").get<std::string>() + ".png")).string());
  cache.images = ImageBatch(int(records.size()), first.height, first.width, 3);
  const auto z0 = records[0].at("z").get<std::vector<float>>();
  if (!z0.empty()) cache.latents.resize(Eigen::Index(z0.size()), Eigen::Index(records.size()));

  for (std::size_t i = 0; i < records.size(); ++i) {
    const json& rec = records[i];
    const auto png = io::read_png_rgb8(
        (fs::path(dir) / "images" / (rec.at("id").get<std::string>() + ".png")).string());
    if (png.height != cache.images.h || png.width != cache.images.w)
      throw IoError("dataset cache: inconsistent image sizes");
    io::from_rgb8(png.rgb, cache.images, int(i));
    const auto z = rec.at("z").get<std::vector<float>>();
    if (cache.latents.size() > 0) {
      if (Eigen::Index(z.size()) != cache.latents.rows())
        throw IoError("dataset cache: inconsistent latent dims");
      cache.latents.col(Eigen::Index(i)) = Eigen::Map<const VecXf>(z.data(), Eigen::Index(z.size()));
    }
    cache.labels.push_back(rec.at("y").is_null() ? std::optional<ClassLabel>{}
                                                 : std::optional<ClassLabel>(rec.at("y").get<int>()));
  }
  return cache;
}

DatasetCache build_anchor_cache(const Generator& g, int n, bool balanced_classes, Rng& rng) {
  if (n < 1) throw ContractError("build_anchor_cache: n < 1");
  const GeneratorSpec& spec = g.spec();
  DatasetCache cache;
  cache.backend = to_string(spec.backend);
  cache.seed = rng.seed();
  cache.latents = sample_latents(spec.default_prior, n, rng);

  std::vector<ClassLabel> ys;
  if (spec.conditional) {
    ys.resize(std::size_t(n));
    if (balanced_classes) {
      if (n % spec.num_classes != 0)
        throw ContractError("build_anchor_cache: balanced mode needs n divisible by num_classes");
      for (int i = 0; i < n; ++i) ys[std::size_t(i)] = i % spec.num_classes;
    } else {
      for (int i = 0; i < n; ++i) ys[std::size_t(i)] = ClassLabel(rng.integer(spec.num_classes));
    }
    cache.images = g.generate(cache.latents, &ys);
    for (int i = 0; i < n; ++i) cache.labels.emplace_back(ys[std::size_t(i)]);
  } else {
    cache.images = g.generate(cache.latents, nullptr);
    for (int i = 0; i < n; ++i)
      cache.labels.push_back(g.true_class(cache.latents.col(i), std::nullopt));
  }
  return cache;
}

}  // namespace genviews::igm
