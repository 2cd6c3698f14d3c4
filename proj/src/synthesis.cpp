#include "irisforge/synthesis.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <map>
#include <set>

#include "irisforge/error.hpp"
#include "irisforge/json_io.hpp"
#include "irisforge/util.hpp"

namespace irisforge {

InferenceGuard::InferenceGuard(const ModelBundle& b) {
  for (const auto* ps : b.parameter_sets())
    for (const auto& p : ps->list()) {
      saved_.emplace_back(p, p->requires_grad);
      p->requires_grad = false;
    }
}

InferenceGuard::~InferenceGuard() {
  for (auto& [p, rg] : saved_) p->requires_grad = rg;
}

MintedIdentity mint_identity(const ModelBundle& b, const Manifest& source, std::size_t sample_index, int m,
                             double eps, std::int64_t identity_id) {
  if (sample_index >= source.samples.size()) throw IndexError("source sample index out of range");
  const auto& s = source.samples[sample_index];
  MintedIdentity id;
  id.identity_id = identity_id;
  id.source_path = s.image_path;
  id.source_identity = s.identity_id;
  id.m = m;
  id.epsilon = eps;
  id.code = encode_identity(b, load_png(source.resolve(s)), m, eps).z_bar;
  id.checkpoint_hash = b.hash();
  return id;
}

Image synthesize_image(const ModelBundle& b, const MintedIdentity& id, const Image& style_image,
                       const AttributeVector& style_attribute) {
  if (id.checkpoint_hash != b.hash())
    throw CheckpointError("identity " + std::to_string(id.identity_id) + " was minted by checkpoint " +
                          hex64(id.checkpoint_hash) + ", not " + hex64(b.hash()));
  return generate(b, id.code, encode_style(b, style_image, style_attribute));
}

void save_provenance(const std::vector<ProvenanceEntry>& entries, std::uint64_t checkpoint_hash,
                     const std::filesystem::path& path) {
  json arr = json::array();
  for (const auto& e : entries)
    arr.push_back(json{{"identity_id", e.identity_id},
                       {"source_path", e.source_path},
                       {"source_identity", e.source_identity},
                       {"m", e.m},
                       {"epsilon", e.epsilon},
                       {"checkpoint", hex64(checkpoint_hash)}});
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f << arr.dump(1) << '\n';
}

std::vector<ProvenanceEntry> load_provenance(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw LoadError("cannot open provenance: " + path.string());
  std::vector<ProvenanceEntry> out;
  try {
    const json arr = json::parse(f);
    for (const auto& j : arr)
      out.push_back({j.at("identity_id").get<std::int64_t>(), j.at("source_path").get<std::string>(),
                     j.value("source_identity", std::int64_t{-1}), j.at("m").get<int>(), j.at("epsilon").get<double>()});
  } catch (const json::exception& e) {
    throw LoadError("malformed provenance " + path.string() + ": " + e.what());
  }
  return out;
}

Manifest generate_dataset(const ModelBundle& b, const Manifest& source, int n_identities, int styles_per_identity,
                          std::uint64_t seed, const std::filesystem::path& out_dir, const GenerationConfig& cfg) {
  if (n_identities < 1 || styles_per_identity < 1) throw ConfigError("generation counts must be positive");
  if (source.samples.empty()) throw InsufficientData("source manifest is empty");
  if (!(cfg.eps_min > 0.0 && cfg.eps_max >= cfg.eps_min)) throw ConfigError("eps range must satisfy 0 < min <= max");
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "images", ec);
  if (ec) throw IoError("cannot create " + (out_dir / "images").string() + ": " + ec.message());

  InferenceGuard guard(b);
  const std::uint64_t ckpt = b.hash();
  const auto images = load_images(source);
  const WarpParams wp = b.warp.params();
  const int M = b.cfg.warps;
  const std::size_t n_src = source.samples.size();

  // Style references grouped by attribute so each identity spans distinct vectors.
  std::map<int, std::vector<std::size_t>> by_combo;
  for (std::size_t i = 0; i < n_src; ++i) by_combo[source.samples[i].attribute.combination_index()].push_back(i);
  std::vector<int> combos;
  for (const auto& [c, v] : by_combo) combos.push_back(c);

  Manifest out;
  out.image_size = b.cfg.image_size;
  out.seed = seed;
  out.base_dir = out_dir;
  out.samples.resize(static_cast<std::size_t>(n_identities) * styles_per_identity);
  std::vector<ProvenanceEntry> prov(n_identities);
  std::vector<std::string> errors(n_identities);
  std::vector<std::string> notes(n_identities);

#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n_identities; ++i) {
    try {
      std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
      std::uniform_real_distribution<double> mag(cfg.eps_min, cfg.eps_max);
      const double eps = mag(rng);
      std::size_t src = static_cast<std::size_t>(i) % n_src;
      int m = i % M;
      // Degenerate warp gradient: try the other warps, then the next sources.
      LatentCode z, code;
      bool ok = false;
      for (std::size_t tries = 0; tries < n_src * M && !ok; ++tries) {
        const auto zt = b.identity_encoder(nn::constant(image_to_tensor(images[src])))->value;
        z.assign(zt.values().begin(), zt.values().end());
        try {
          code = shift_code(wp, m, z, eps);
          ok = true;
        } catch (const DegenerateGradient&) {
          notes[i] += "degenerate warp at source " + std::to_string(src) + " m " + std::to_string(m) + "; ";
          if (++m == M) m = 0, src = (src + 1) % n_src;
        }
      }
      if (!ok) throw DegenerateGradient("no usable warp for identity " + std::to_string(i));

      MintedIdentity id;
      id.identity_id = kSyntheticIdOffset + i;
      id.source_path = source.samples[src].image_path;
      id.source_identity = source.samples[src].identity_id;
      id.m = m;
      id.epsilon = eps;
      id.code = std::move(code);
      id.checkpoint_hash = ckpt;
      prov[i] = {id.identity_id, id.source_path, id.source_identity, m, eps};

      std::vector<int> order(combos.size());
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      for (int k = 0; k < styles_per_identity; ++k) {
        const auto& pool = by_combo[combos[order[k % order.size()]]];
        const std::size_t ref = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
        const Image img = synthesize_image(b, id, images[ref], source.samples[ref].attribute);
        char name[64];
        std::snprintf(name, sizeof name, "images/syn%06d_s%02d.png", i, k);
        save_png(img, out_dir / name);
        IrisSample s;
        s.image_path = name;
        s.identity_id = id.identity_id;
        s.attribute = source.samples[ref].attribute;
        out.samples[static_cast<std::size_t>(i) * styles_per_identity + k] = std::move(s);
      }
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (int i = 0; i < n_identities; ++i) {
    if (!errors[i].empty()) throw Error("generation failed for identity " + std::to_string(i) + ": " + errors[i]);
    if (!notes[i].empty()) std::cerr << "identity " << i << ": " << notes[i] << '\n';
  }
  save_manifest(out, out_dir / "manifest.json");
  save_provenance(prov, ckpt, out_dir / "provenance.json");
  return out;
}

}  // namespace irisforge
