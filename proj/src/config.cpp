#include "gannotation/config.hpp"

#include "gannotation/log.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace gannotation {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw config_error(key, "expected a number, got '" + v + "'");
  }
  return out;
}

std::int64_t to_int(const std::string& key, const std::string& v, std::int64_t min) {
  std::int64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) throw config_error(key, "expected an integer, got '" + v + "'");
  if (out < min) throw config_error(key, "must be >= " + std::to_string(min));
  return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw config_error(key, "expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw config_error(key, "expected true or false, got '" + v + "'");
}

double non_negative(const std::string& key, double v) {
  if (v < 0.0) throw config_error(key, "must be >= 0");
  return v;
}

double positive(const std::string& key, double v) {
  if (!(v > 0.0)) throw config_error(key, "must be > 0");
  return v;
}

double open_unit(const std::string& key, double v) {
  if (!(v > 0.0 && v < 1.0)) throw config_error(key, "must lie in (0, 1)");
  return v;
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(key, trim(item)));
  if (out.empty()) throw config_error(key, "expected a comma-separated list");
  return out;
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
  return s;
}

struct Field {
  std::string key;
  std::function<void(RunConfig&, const std::string&, const fs::path&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename Get>
Field number(std::string key, Get member, std::function<double(const std::string&, double)> check) {
  return {key,
          [key, member, check](RunConfig& c, const std::string& v, const fs::path&) {
            member(c) = check(key, to_double(key, v));
          },
          [member](const RunConfig& c) { return format_double(member(const_cast<RunConfig&>(c))); }};
}

template <typename Get>
Field integer(std::string key, Get member, std::int64_t min) {
  return {key, [key, member, min](RunConfig& c, const std::string& v, const fs::path&) { member(c) = to_int(key, v, min); },
          [member](const RunConfig& c) { return std::to_string(member(const_cast<RunConfig&>(c))); }};
}

template <typename Get>
Field path(std::string key, Get member) {
  return {key,
          [member](RunConfig& c, const std::string& v, const fs::path& base) {
            const fs::path p(v);
            member(c) = p.is_absolute() ? p : (base / p).lexically_normal();
          },
          [member](const RunConfig& c) { return member(const_cast<RunConfig&>(c)).string(); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(number("lambda_adv", [](RunConfig& c) -> double& { return c.train.weights.adv; }, non_negative));
    f.push_back(number("lambda_pix", [](RunConfig& c) -> double& { return c.train.weights.pix; }, non_negative));
    f.push_back(number("lambda_cyc", [](RunConfig& c) -> double& { return c.train.weights.cyc; }, non_negative));
    f.push_back(number("lambda_rec", [](RunConfig& c) -> double& { return c.train.weights.rec; }, non_negative));
    f.push_back(number("lambda_pp", [](RunConfig& c) -> double& { return c.train.weights.pp; }, non_negative));
    f.push_back(number("lambda_tv", [](RunConfig& c) -> double& { return c.train.weights.tv; }, non_negative));
    f.push_back(number("learning_rate", [](RunConfig& c) -> double& { return c.train.adam.learning_rate; }, positive));
    f.push_back(number("adam_beta1", [](RunConfig& c) -> double& { return c.train.adam.beta1; }, open_unit));
    f.push_back(number("adam_beta2", [](RunConfig& c) -> double& { return c.train.adam.beta2; }, open_unit));
    f.push_back(integer("batch_size", [](RunConfig& c) -> Index& { return c.train.batch_size; }, 1));
    f.push_back(integer("epochs", [](RunConfig& c) -> Index& { return c.train.epochs; }, 1));
    f.push_back(integer("iterations_per_epoch", [](RunConfig& c) -> Index& { return c.train.iterations_per_epoch; }, 1));
    f.push_back(integer("d_steps", [](RunConfig& c) -> Index& { return c.train.d_steps; }, 1));
    f.push_back({"seed", [](RunConfig& c, const std::string& v, const fs::path&) { c.train.seed = to_uint("seed", v); },
                 [](const RunConfig& c) { return std::to_string(c.train.seed); }});
    f.push_back({"enable_rec",
                 [](RunConfig& c, const std::string& v, const fs::path&) { c.train.enable_rec = to_bool("enable_rec", v); },
                 [](const RunConfig& c) { return std::string(c.train.enable_rec ? "true" : "false"); }});
    f.push_back(integer("n_points", [](RunConfig& c) -> Index& { return c.model.generator.condition_channels; }, 2));
    f.push_back(number("sigma", [](RunConfig& c) -> double& { return c.model.sigma; }, positive));
    f.push_back(integer("out_size", [](RunConfig& c) -> Index& { return c.model.image_size; }, 4));
    f.push_back(number("margin", [](RunConfig& c) -> double& { return c.margin; }, non_negative));
    f.push_back(path("train_manifest", [](RunConfig& c) -> fs::path& { return c.train_manifest; }));
    f.push_back(integer("pairs_per_video", [](RunConfig& c) -> Index& { return c.pairs_per_video; }, 0));
    f.push_back(number("aug_rotation_deg", [](RunConfig& c) -> double& { return c.augmentation.rotation_deg; }, non_negative));
    f.push_back(number("aug_scale_min", [](RunConfig& c) -> double& { return c.augmentation.scale_min; }, positive));
    f.push_back(number("aug_scale_max", [](RunConfig& c) -> double& { return c.augmentation.scale_max; }, positive));
    f.push_back(number("aug_translation", [](RunConfig& c) -> double& { return c.augmentation.translation; }, non_negative));
    f.push_back(integer("gen_base_width", [](RunConfig& c) -> Index& { return c.model.generator.base_width; }, 1));
    f.push_back(integer("gen_n_residual", [](RunConfig& c) -> Index& { return c.model.generator.n_residual; }, 1));
    f.push_back(integer("disc_base_width", [](RunConfig& c) -> Index& { return c.model.discriminator.base_width; }, 1));
    f.push_back(integer("disc_n_down", [](RunConfig& c) -> Index& { return c.model.discriminator.n_down; }, 1));
    f.push_back(number("disc_leak", [](RunConfig& c) -> double& { return c.model.discriminator.leak; }, non_negative));
    f.push_back({"extractor",
                 [](RunConfig&, const std::string& v, const fs::path&) {
                   if (v != "random_conv") throw config_error("extractor", "unknown extractor '" + v + "' (available: random_conv)");
                 },
                 [](const RunConfig&) { return std::string("random_conv"); }});
    f.push_back(integer("extractor_base_width", [](RunConfig& c) -> Index& { return c.model.extractor.base_width; }, 1));
    f.push_back({"extractor_seed",
                 [](RunConfig& c, const std::string& v, const fs::path&) { c.model.extractor.seed = to_uint("extractor_seed", v); },
                 [](const RunConfig& c) { return std::to_string(c.model.extractor.seed); }});
    f.push_back(path("eval_manifest", [](RunConfig& c) -> fs::path& { return c.eval.manifest; }));
    f.push_back(path("eval_manifest_b", [](RunConfig& c) -> fs::path& { return c.eval.manifest_b; }));
    f.push_back(path("eval_sequence_dir", [](RunConfig& c) -> fs::path& { return c.eval.sequence_dir; }));
    f.push_back(integer("eval_max_images", [](RunConfig& c) -> Index& { return c.eval.max_images; }, 0));
    f.push_back({"robustness_sigmas",
                 [](RunConfig& c, const std::string& v, const fs::path&) {
                   c.eval.robustness_sigmas = to_list("robustness_sigmas", v);
                   const auto& s = c.eval.robustness_sigmas;
                   for (std::size_t i = 0; i < s.size(); ++i) {
                     if (s[i] < 0.0 || (i > 0 && s[i] < s[i - 1])) {
                       throw config_error("robustness_sigmas", "values must be non-negative and ascending");
                     }
                   }
                 },
                 [](const RunConfig& c) { return join(c.eval.robustness_sigmas); }});
    f.push_back(number("robustness_rotation_deg", [](RunConfig& c) -> double& { return c.eval.robustness_rotation_deg; },
                       non_negative));
    f.push_back({"eval_seed",
                 [](RunConfig& c, const std::string& v, const fs::path&) { c.eval.seed = to_uint("eval_seed", v); },
                 [](const RunConfig& c) { return std::to_string(c.eval.seed); }});
    return f;
  }();
  return table;
}

// Values that follow from other keys, plus checks spanning several keys.
void finalize(RunConfig& c) {
  c.model.discriminator.input_size = c.model.image_size;
  c.model.generator.seed = c.train.seed;
  c.model.discriminator.seed = c.train.seed + 1;
  if (c.model.image_size % 4 != 0) throw config_error("out_size", "must be a multiple of 4");
  Index s = c.model.image_size;
  for (Index i = 0; i < c.model.discriminator.n_down; ++i) {
    if (s % 2 != 0) throw config_error("disc_n_down", "out_size is not divisible by 2^disc_n_down");
    s /= 2;
  }
  if (c.augmentation.scale_max < c.augmentation.scale_min) throw config_error("aug_scale_max", "must be >= aug_scale_min");
}

}  // namespace

const std::vector<std::string>& run_config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& f : fields()) k.push_back(f.key);
    return k;
  }();
  return keys;
}

RunConfig parse_run_config(const std::string& text, const fs::path& base_dir, bool announce_defaults) {
  RunConfig cfg;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw config_error(line, "line " + std::to_string(line_no) + " is not of the form 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto& table = fields();
    const auto it = std::find_if(table.begin(), table.end(), [&](const Field& f) { return f.key == key; });
    if (it == table.end()) throw config_error(key, "unknown key (line " + std::to_string(line_no) + ")");
    if (!seen.insert(key).second) throw config_error(key, "set more than once");
    if (value.empty()) throw config_error(key, "empty value");
    it->set(cfg, value, base_dir);
  }
  if (announce_defaults) {
    for (const auto& f : fields()) {
      if (!seen.count(f.key)) log_notice("config: " + f.key + " not set, using default " + f.get(cfg));
    }
  }
  finalize(cfg);
  return cfg;
}

RunConfig load_run_config(const fs::path& path, bool announce_defaults) {
  std::ifstream in(path);
  if (!in) throw config_error("<file>", "cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str(), fs::absolute(path).parent_path(), announce_defaults);
}

std::string format_run_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& f : fields()) {
    const std::string v = f.get(cfg);
    if (!v.empty()) out += f.key + " = " + v + "\n";
  }
  return out;
}

}  // namespace gannotation
