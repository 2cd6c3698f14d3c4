#include "irisforge/toydata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <random>
#include <set>

#include <json.hpp>

#include "irisforge/error.hpp"
#include "irisforge/util.hpp"

namespace irisforge {
namespace {

using json = nlohmann::json;

constexpr double kPupilLevel = 0.03;
constexpr double kIrisLevel = 0.26;
constexpr double kIrisAmplitude = 0.26;
constexpr double kScleraLevel = 0.92;

struct Octave {
  int angular_cells;
  int radial_cells;
  double amplitude;
};
constexpr std::array<Octave, 2> kOctaves{
    Octave{10, 2, 1.0}, Octave{16, 3, 0.7}};

double lattice(std::int64_t seed, int octave, int i, int j) {
  const std::uint64_t h = derive_seed(derive_seed(static_cast<std::uint64_t>(seed), octave),
                                      (static_cast<std::uint64_t>(i) << 20) ^ static_cast<std::uint64_t>(j));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double smooth(double t) { return t * t * (3.0 - 2.0 * t); }

double smoothstep_edge(double x, double edge) {
  // 0 well below edge, 1 well above; one-pixel transition.
  const double t = std::clamp(x - edge + 0.5, 0.0, 1.0);
  return smooth(t);
}

json circle_json(const Circle& c) { return json::array({c.cx, c.cy, c.r}); }

Circle circle_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw LoadError("circle must be [cx, cy, r]");
  return Circle{j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json manifest_json(const Manifest& m) {
  json samples = json::array();
  for (const auto& s : m.samples) {
    json js{{"path", s.image_path}, {"identity_id", s.identity_id}, {"attribute", s.attribute.to_string()}};
    if (s.pupil) js["pupil"] = circle_json(*s.pupil);
    if (s.limbus) js["limbus"] = circle_json(*s.limbus);
    samples.push_back(std::move(js));
  }
  return json{{"image_size", m.image_size}, {"seed", m.seed}, {"version", m.version}, {"samples", samples}};
}

}  // namespace

std::filesystem::path Manifest::resolve(const IrisSample& s) const {
  std::filesystem::path p(s.image_path);
  return p.is_absolute() ? p : base_dir / p;
}

std::vector<std::int64_t> Manifest::identities() const {
  std::set<std::int64_t> ids;
  for (const auto& s : samples) ids.insert(s.identity_id);
  return {ids.begin(), ids.end()};
}

ToyScene ToyScene::for_size(std::int64_t identity_seed, std::uint64_t rng_seed, int size) {
  return ToyScene{identity_seed, rng_seed, 0.11 * size, 0.28 * size};
}

double iris_texture(std::int64_t identity_seed, double rho, double phi) {
  double u = phi / (2.0 * std::numbers::pi);
  u -= std::floor(u);
  rho = std::clamp(rho, 0.0, 1.0);
  double sum = 0.0;
  double norm = 0.0;
  for (int o = 0; o < static_cast<int>(kOctaves.size()); ++o) {
    const auto& oc = kOctaves[o];
    const double a = u * oc.angular_cells;
    const double r = rho * oc.radial_cells;
    const int i0 = static_cast<int>(std::floor(a)) % oc.angular_cells;
    const int i1 = (i0 + 1) % oc.angular_cells;
    const int j0 = std::min(static_cast<int>(std::floor(r)), oc.radial_cells - 1);
    const int j1 = j0 + 1;
    const double ta = smooth(a - std::floor(a));
    const double tr = smooth(std::clamp(r - j0, 0.0, 1.0));
    const double v00 = lattice(identity_seed, o, i0, j0);
    const double v10 = lattice(identity_seed, o, i1, j0);
    const double v01 = lattice(identity_seed, o, i0, j1);
    const double v11 = lattice(identity_seed, o, i1, j1);
    const double v = (v00 * (1 - ta) + v10 * ta) * (1 - tr) + (v01 * (1 - ta) + v11 * ta) * tr;
    sum += oc.amplitude * (v - 0.5);
    norm += oc.amplitude;
  }
  // Octave sums concentrate near the middle; stretch back towards [0,1].
  return std::clamp(0.5 + 1.6 * sum / norm, 0.0, 1.0);
}

RenderedIris render_scene(const ToyScene& scene, int width, int height, double cx, double cy,
                          double angle_deg, double pupil_scale) {
  const double rl = scene.limbus_radius;
  const double rp = scene.pupil_radius * pupil_scale;
  const double theta = angle_deg * std::numbers::pi / 180.0;
  std::mt19937_64 rng(scene.rng_seed);
  std::uniform_real_distribution<double> gain_dist(0.96, 1.04);
  const double gain = gain_dist(rng);

  RenderedIris out;
  out.image = Image(width, height);
  out.pupil = Circle{cx, cy, rp};
  out.limbus = Circle{cx, cy, rl};
  auto shade = [&](double px, double py) {
    const double dx = px - cx;
    const double dy = py - cy;
    const double r = std::hypot(dx, dy);
    const double phi = std::atan2(dy, dx) - theta;
    // Texture lives in rubber-sheet coordinates so pupil changes stretch it.
    const double rho = (r - rp) / (rl - rp);
    const double iris = kIrisLevel + kIrisAmplitude * (iris_texture(scene.identity_seed, rho, phi) - 0.5);
    const double sclera = kScleraLevel - 0.04 * std::exp(-(r - rl) / (0.25 * rl));
    const double in_iris = smoothstep_edge(r, rp);
    const double in_sclera = smoothstep_edge(r, rl);
    return kPupilLevel * (1 - in_iris) + in_iris * (iris * (1 - in_sclera) + sclera * in_sclera);
  };
  constexpr int kSub = 3;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double v = 0.0;
      for (int sy = 0; sy < kSub; ++sy)
        for (int sx = 0; sx < kSub; ++sx)
          v += shade(x + (sx + 0.5) / kSub - 0.5, y + (sy + 0.5) / kSub - 0.5);
      v /= kSub * kSub;
      out.image.at(x, y) = static_cast<float>(std::clamp(v * gain, 0.0, 1.0));
    }
  }
  return out;
}

RenderedIris render_toy_iris(std::int64_t identity_seed, const AttributeVector& v, int size,
                             std::uint64_t rng_seed, const PupilFactors& factors) {
  if (size < 64) throw GeometryError("toy iris size must be at least 64");
  const Style st = decode_attributes(v);
  const ToyScene scene = ToyScene::for_size(identity_seed, rng_seed, size);
  return render_scene(scene, size, size, size / 2 + st.shift.dx, size / 2 + st.shift.dy, st.angle_deg,
                      factors.factor(st.pupil));
}

int toy_combination_for(std::size_t global_index) {
  // 13 is coprime with 50, so every block of 50 consecutive samples visits
  // each combination once while consecutive samples differ in all groups.
  return static_cast<int>((global_index * 13) % kStyleCombinations);
}

Manifest build_toy_dataset(int n_identities, int styles_per_identity, int size, std::uint64_t seed,
                           const std::filesystem::path& out_dir) {
  if (n_identities < 1 || styles_per_identity < 1) throw ConfigError("dataset counts must be positive");
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "images", ec);
  if (ec) throw IoError("cannot create " + (out_dir / "images").string() + ": " + ec.message());

  Manifest m;
  m.image_size = size;
  m.seed = seed;
  m.base_dir = out_dir;
  const std::size_t total = static_cast<std::size_t>(n_identities) * styles_per_identity;
  m.samples.resize(total);

  std::vector<std::string> errors(total);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t g = 0; g < total; ++g) {
    const int id = static_cast<int>(g / styles_per_identity);
    const int k = static_cast<int>(g % styles_per_identity);
    const auto attr = AttributeVector::from_combination(toy_combination_for(g));
    const auto r = render_toy_iris(id, attr, size, derive_seed(seed, g));
    char name[64];
    std::snprintf(name, sizeof name, "images/id%04d_s%02d.png", id, k);
    try {
      save_png(r.image, out_dir / name);
    } catch (const std::exception& e) {
      errors[g] = e.what();
    }
    IrisSample s{name, id, attr, r.pupil, r.limbus};
    m.samples[g] = std::move(s);
  }
  for (const auto& e : errors)
    if (!e.empty()) throw IoError(e);
  save_manifest(m, out_dir / "manifest.json");
  return m;
}

void save_manifest(const Manifest& m, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write manifest: " + path.string());
  f << manifest_json(m).dump(1) << '\n';
  if (!f) throw IoError("failed writing manifest: " + path.string());
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw LoadError("cannot open manifest: " + path.string());
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw LoadError("malformed manifest " + path.string() + ": " + e.what());
  }
  Manifest m;
  m.base_dir = path.parent_path();
  try {
    m.image_size = j.at("image_size").get<int>();
    m.seed = j.value("seed", std::uint64_t{0});
    m.version = j.value("version", std::string("1"));
    for (const auto& js : j.at("samples")) {
      IrisSample s;
      s.image_path = js.at("path").get<std::string>();
      s.identity_id = js.at("identity_id").get<std::int64_t>();
      s.attribute = AttributeVector::parse(js.at("attribute").get<std::string>());
      if (js.contains("pupil")) s.pupil = circle_from(js["pupil"]);
      if (js.contains("limbus")) s.limbus = circle_from(js["limbus"]);
      m.samples.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw LoadError("malformed manifest " + path.string() + ": " + e.what());
  } catch (const InvalidAttribute& e) {
    throw LoadError("malformed manifest " + path.string() + ": " + e.what());
  }
  for (const auto& s : m.samples) {
    if (!std::filesystem::exists(m.resolve(s)))
      throw LoadError("manifest references missing file: " + m.resolve(s).string());
    if (s.pupil && s.limbus && !(s.pupil->r < s.limbus->r))
      throw LoadError("pupil radius must be smaller than limbus radius: " + s.image_path);
  }
  return m;
}

std::uint64_t manifest_content_hash(const Manifest& m) {
  std::uint64_t h = fnv1a64(manifest_json(m).dump());
  for (const auto& s : m.samples) {
    std::ifstream f(m.resolve(s), std::ios::binary);
    if (!f) throw LoadError("cannot read " + m.resolve(s).string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    h = fnv1a64(std::as_bytes(std::span<const char>(bytes)), h);
  }
  return h;
}

std::pair<Manifest, Manifest> split_dataset(const Manifest& m, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw SplitError("train fraction must lie strictly between 0 and 1");
  auto ids = m.identities();
  const auto n = static_cast<long>(ids.size());
  if (n < 2) throw SplitError("need at least two identities to split");
  long n_test = static_cast<long>(std::floor(n - n * train_fraction + 1e-9));
  n_test = std::clamp(n_test, 1L, n - 1);

  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  const std::set<std::int64_t> test_ids(ids.begin(), ids.begin() + n_test);

  Manifest train = m, test = m;
  train.samples.clear();
  test.samples.clear();
  for (const auto& s : m.samples) (test_ids.count(s.identity_id) ? test : train).samples.push_back(s);
  return {std::move(train), std::move(test)};
}

}  // namespace irisforge
