#include "fstrans/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <unordered_map>

#include "fstrans/image_io.hpp"

namespace fs = std::filesystem;

namespace fstrans {

std::int64_t Rng::uniform_int(std::int64_t n) {
  TORCH_CHECK(n > 0, "uniform_int needs n > 0");
  const std::uint64_t un = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % un;
  std::uint64_t v;
  do {
    v = engine_();
  } while (v >= limit);
  return static_cast<std::int64_t>(v % un);
}

double Rng::uniform_real() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

Rng Rng::fork(std::uint64_t salt) {
  return Rng(engine_() ^ (salt * 0x9E3779B97F4A7C15ull));
}

std::string Rng::save_state() const {
  std::ostringstream os;
  os << engine_;
  return os.str();
}

void Rng::load_state(const std::string& s) {
  std::istringstream is(s);
  is >> engine_;
  if (!is) throw RuntimeFailure("bad rng state string");
}

std::vector<std::string> CorpusIndex::all_classes() const {
  std::vector<std::string> all = cfg_.source_classes;
  all.insert(all.end(), cfg_.target_classes.begin(), cfg_.target_classes.end());
  return all;
}

std::int64_t CorpusIndex::label_of(const std::string& cls) const {
  const auto& s = cfg_.source_classes;
  auto it = std::find(s.begin(), s.end(), cls);
  if (it != s.end()) return it - s.begin();
  const auto& t = cfg_.target_classes;
  it = std::find(t.begin(), t.end(), cls);
  if (it != t.end()) return n_source() + (it - t.begin());
  throw ConfigError("unknown class: " + cls);
}

const std::vector<fs::path>& CorpusIndex::files(const std::string& cls) const {
  auto it = files_.find(cls);
  if (it == files_.end()) throw ConfigError("class not in index: " + cls);
  return it->second;
}

CorpusIndex CorpusIndex::with_source_subset(int n) const {
  if (n < 1 || n > n_source())
    throw ConfigError("source subset size out of range: " + std::to_string(n));
  CorpusIndex sub;
  sub.cfg_ = cfg_;
  sub.cfg_.source_classes.assign(cfg_.source_classes.begin(), cfg_.source_classes.begin() + n);
  for (const auto& cls : sub.all_classes()) sub.files_[cls] = files_.at(cls);
  return sub;
}

CorpusIndex scan_corpus(const DatasetConfig& cfg) {
  CorpusIndex index;
  index.cfg_ = cfg;
  if (cfg.root.empty() || !fs::is_directory(cfg.root))
    throw ConfigError("dataset root is not a directory: " + cfg.root);

  for (const auto& cls : index.all_classes()) {
    const fs::path dir = fs::path(cfg.root) / cls;
    if (!fs::is_directory(dir)) throw ConfigError("missing class directory: " + dir.string());

    std::vector<fs::path> candidates;
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.is_regular_file() && is_image_file(entry.path()))
        candidates.push_back(entry.path());
    std::sort(candidates.begin(), candidates.end());

    std::vector<fs::path> decodable;
    for (const auto& p : candidates) {
      try {
        (void)read_image(p);
        decodable.push_back(p);
      } catch (const std::exception& e) {
        std::cerr << "warning: skipping undecodable image " << p << ": " << e.what() << "\n";
      }
    }
    if (decodable.empty())
      throw ConfigError("class has no decodable images: " + dir.string());
    index.files_[cls] = std::move(decodable);
  }
  return index;
}

namespace {

// Decoded-image cache; the corpora at play fit in memory many times over.
torch::Tensor load_cached(const fs::path& path, int image_size) {
  static std::mutex mu;
  static std::unordered_map<std::string, torch::Tensor> cache;
  const std::string key = path.string() + "#" + std::to_string(image_size);
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  auto t = load_image_tensor(path, image_size);
  std::lock_guard<std::mutex> lock(mu);
  cache.emplace(key, t);
  return t;
}

struct TupleSpecDraw {
  std::int64_t c_x, c_y;
  fs::path content;
  std::vector<fs::path> class_files;
};

TupleSpecDraw draw_tuple(const CorpusIndex& index, int k, Rng& rng) {
  const std::int64_t n_s = index.n_source();
  if (n_s < 2) throw ConfigError("training needs at least 2 source classes");
  TORCH_CHECK(k >= 1, "k must be >= 1");

  TupleSpecDraw d;
  d.c_x = rng.uniform_int(n_s);
  const std::int64_t off = rng.uniform_int(n_s - 1);
  d.c_y = off >= d.c_x ? off + 1 : off;

  const auto& cx_files = index.files(index.source_classes()[d.c_x]);
  d.content = cx_files[rng.uniform_int(static_cast<std::int64_t>(cx_files.size()))];
  const auto& cy_files = index.files(index.source_classes()[d.c_y]);
  for (int i = 0; i < k; ++i)
    d.class_files.push_back(cy_files[rng.uniform_int(static_cast<std::int64_t>(cy_files.size()))]);
  return d;
}

}  // namespace

TrainingTuple sample_training_tuple(const CorpusIndex& index, int k, Rng& rng) {
  auto d = draw_tuple(index, k, rng);
  TrainingTuple t;
  t.c_x = d.c_x;
  t.c_y = d.c_y;
  t.content = load_cached(d.content, index.image_size()).unsqueeze(0);
  t.class_images = load_images(d.class_files, index.image_size());
  return t;
}

TupleBatch sample_training_batch(const CorpusIndex& index, int batch_size, int k, Rng& rng,
                                 bool flip_augment) {
  std::vector<torch::Tensor> contents, class_sets;
  std::vector<std::int64_t> cxs, cys;
  for (int b = 0; b < batch_size; ++b) {
    auto d = draw_tuple(index, k, rng);
    auto content = load_cached(d.content, index.image_size());
    auto ys = load_images(d.class_files, index.image_size());
    if (flip_augment) {
      if (rng.uniform_real() < 0.5) content = content.flip(2);
      for (int i = 0; i < k; ++i)
        if (rng.uniform_real() < 0.5) ys[i] = ys[i].flip(2);
    }
    contents.push_back(content);
    class_sets.push_back(ys);
    cxs.push_back(d.c_x);
    cys.push_back(d.c_y);
  }
  TupleBatch batch;
  batch.content = torch::stack(contents);
  batch.class_images = torch::stack(class_sets);
  batch.c_x = torch::tensor(cxs, torch::kLong);
  batch.c_y = torch::tensor(cys, torch::kLong);
  return batch;
}

ImageBatch load_class_batch(const CorpusIndex& index, const std::string& cls,
                            std::int64_t max_images) {
  const auto& all = index.files(cls);
  std::int64_t n = static_cast<std::int64_t>(all.size());
  if (max_images > 0) n = std::min(n, max_images);
  std::vector<fs::path> paths(all.begin(), all.begin() + n);
  ImageBatch b;
  b.values = load_images(paths, index.image_size());
  b.labels = torch::full({n}, index.label_of(cls), torch::kLong);
  return b;
}

torch::Tensor load_images(const std::vector<fs::path>& paths, int image_size) {
  std::vector<torch::Tensor> imgs;
  imgs.reserve(paths.size());
  for (const auto& p : paths) imgs.push_back(load_cached(p, image_size));
  return torch::stack(imgs);
}

// ---------------------------------------------------------------------------
// Procedural corpus
// ---------------------------------------------------------------------------

namespace {

struct Rgb {
  double r, g, b;
};

Rgb hsv(double h, double s, double v) {
  h = h - std::floor(h);
  const double c = v * s;
  const double hp = h * 6.0;
  const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hp) % 6) {
    case 0: r = c; g = x; break;
    case 1: r = x; g = c; break;
    case 2: g = c; b = x; break;
    case 3: g = x; b = c; break;
    case 4: r = x; b = c; break;
    default: r = c; b = x; break;
  }
  const double m = v - c;
  return {r + m, g + m, b + m};
}

Rgb lerp(const Rgb& a, const Rgb& b, double t) {
  return {a.r + (b.r - a.r) * t, a.g + (b.g - a.g) * t, a.b + (b.b - a.b) * t};
}

// Class appearance: one palette + shape template + texture per class.
// Palettes are spread evenly around the hue wheel so appearance dominates
// class identity; shape/texture cycle through small template sets.
struct ClassStyle {
  Rgb bg, fg1, fg2;
  int shape;    // 0..5
  int texture;  // 0..4
};

ClassStyle class_style(int cls, int n_classes) {
  const double hue = static_cast<double>(cls) / n_classes;
  ClassStyle st;
  st.bg = hsv(hue, 0.50, 0.40 + 0.12 * (cls % 3));
  st.fg1 = hsv(hue, 0.88, 0.96);
  st.fg2 = hsv(hue + 0.12, 0.55, 0.80);
  st.shape = cls % 6;
  st.texture = (cls / 6) % 5;
  return st;
}

bool inside_shape(int shape, double u, double v) {
  const double au = std::fabs(u), av = std::fabs(v);
  switch (shape) {
    case 0: return u * u + v * v <= 1.0;                    // disc
    case 1: return au <= 0.85 && av <= 0.85;                // square
    case 2: return v > -0.85 && v < 0.9 && au < (0.9 - v) * 0.55;  // triangle
    case 3: return au + av <= 0.95;                         // diamond
    case 4: {                                               // ring
      const double r = std::sqrt(u * u + v * v);
      return r >= 0.45 && r <= 0.95;
    }
    default:                                                // cross
      return (au <= 0.32 && av <= 0.95) || (av <= 0.32 && au <= 0.95);
  }
}

Rgb texture_color(const ClassStyle& st, double u, double v) {
  auto cell = [](double x) { return x - std::floor(x); };
  switch (st.texture) {
    case 0: return st.fg1;
    case 1: return (static_cast<int>(std::floor((v + 1.0) * 2.0)) & 1) ? st.fg2 : st.fg1;
    case 2: return (static_cast<int>(std::floor((u + v) * 2.5)) & 1) ? st.fg2 : st.fg1;
    case 3: {
      const double du = cell(u * 2.5) - 0.5, dv = cell(v * 2.5) - 0.5;
      return (du * du + dv * dv < 0.09) ? st.fg2 : st.fg1;
    }
    default: return lerp(st.fg1, st.fg2, (u + 1.0) * 0.5);
  }
}

RawImage render_sample(const ClassStyle& st, int size, Rng& rng) {
  // Pose/position/scale are the within-class (content) factors.
  const double cx = 0.32 + 0.36 * rng.uniform_real();
  const double cy = 0.32 + 0.36 * rng.uniform_real();
  const double scale = 0.22 + 0.16 * rng.uniform_real();
  const double theta = (rng.uniform_real() - 0.5) * (M_PI / 2.0);
  const double gain = 0.94 + 0.12 * rng.uniform_real();
  const double ct = std::cos(theta), sn = std::sin(theta);

  RawImage img;
  img.width = img.height = size;
  img.pixels.resize(static_cast<std::size_t>(size) * size * 3);

  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      Rgb acc{0, 0, 0};
      for (int sub = 0; sub < 4; ++sub) {  // 2x2 supersampling
        const double px = (x + 0.25 + 0.5 * (sub & 1)) / size;
        const double py = (y + 0.25 + 0.5 * (sub >> 1)) / size;
        const double dx = (px - cx) / scale, dy = (py - cy) / scale;
        const double u = ct * dx + sn * dy, v = -sn * dx + ct * dy;
        Rgb c = st.bg;
        c = lerp(c, {0, 0, 0}, 0.18 * py);  // vertical shading on the backdrop
        if (inside_shape(st.shape, u, v)) c = texture_color(st, u, v);
        acc.r += c.r;
        acc.g += c.g;
        acc.b += c.b;
      }
      auto to_u8 = [&](double ch) {
        const double val = std::clamp(ch * 0.25 * gain, 0.0, 1.0);
        return static_cast<std::uint8_t>(std::lround(val * 255.0));
      };
      std::uint8_t* px8 = img.pixels.data() + (static_cast<std::size_t>(y) * size + x) * 3;
      px8[0] = to_u8(acc.r);
      px8[1] = to_u8(acc.g);
      px8[2] = to_u8(acc.b);
    }
  }
  return img;
}

std::string class_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "class_%02d", i);
  return buf;
}

}  // namespace

void synthesize_corpus(const fs::path& root, const SynthesisSpec& spec) {
  if (spec.n_classes < 4) throw ConfigError("synthetic corpus needs >= 4 classes");
  if (spec.n_per_class < 1 || spec.image_size < 8)
    throw ConfigError("bad synthetic corpus parameters");

  fs::create_directories(root);
  std::vector<std::string> names;
  Rng rng(spec.seed);
  for (int c = 0; c < spec.n_classes; ++c) {
    const std::string name = class_name(c);
    names.push_back(name);
    const fs::path dir = root / name;
    fs::create_directories(dir);
    const ClassStyle st = class_style(c, spec.n_classes);
    Rng class_rng = rng.fork(static_cast<std::uint64_t>(c) + 1);
    for (int i = 0; i < spec.n_per_class; ++i) {
      char buf[24];
      std::snprintf(buf, sizeof(buf), "img_%04d.png", i);
      write_png(dir / buf, render_sample(st, spec.image_size, class_rng));
    }
  }

  json manifest = {{"kind", "synthetic_corpus"},
                   {"n_classes", spec.n_classes},
                   {"n_per_class", spec.n_per_class},
                   {"image_size", spec.image_size},
                   {"seed", spec.seed},
                   {"classes", names}};
  std::ofstream out(root / "manifest.json");
  out << manifest.dump(2) << "\n";
  if (!out) throw RuntimeFailure("cannot write corpus manifest");
}

}  // namespace fstrans
