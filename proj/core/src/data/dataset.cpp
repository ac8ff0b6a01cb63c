#include "semamba/data/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <regex>
#include <set>

#include "semamba/data/png_io.hpp"

namespace semamba::data {

namespace fs = std::filesystem;

Image normalize_intensity(const Grid<uint16_t>& raw) {
  Image out(raw.height, raw.width, 0.0f);
  if (raw.data.empty()) return out;
  const auto [lo_it, hi_it] = std::minmax_element(raw.data.begin(), raw.data.end());
  const double lo = *lo_it;
  const double range = static_cast<double>(*hi_it) - lo;
  if (range <= 0.0) return out;
  for (std::size_t i = 0; i < raw.data.size(); ++i) {
    out.data[i] = static_cast<float>((raw.data[i] - lo) / range);
  }
  return out;
}

std::vector<Sample> load_dataset(const fs::path& root, int classes) {
  if (!fs::is_directory(root)) throw DataError("dataset root " + root.string() + " is not a directory");
  static const std::regex image_name(R"(slice_(\d+)_img\.png)");

  std::vector<Sample> samples;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (!entry.is_directory()) continue;
    const auto case_id = entry.path().filename().string();
    for (const auto& file : fs::directory_iterator(entry.path())) {
      std::smatch m;
      const auto name = file.path().filename().string();
      if (!std::regex_match(name, m, image_name)) continue;

      Sample s;
      s.case_id = case_id;
      s.slice_index = std::stoi(m[1].str());
      s.image = normalize_intensity(read_png_gray(file.path()));

      const auto mask_path = entry.path() / ("slice_" + m[1].str() + "_mask.png");
      if (fs::exists(mask_path)) {
        int depth = 0;
        const auto raw = read_png_gray(mask_path, &depth);
        if (depth != 8) throw DataError("mask " + mask_path.string() + " must be 8-bit");
        if (!(raw.height == s.image.height && raw.width == s.image.width)) {
          throw DataError("mask " + mask_path.string() + " size differs from its image");
        }
        Mask mask(raw.height, raw.width);
        for (std::size_t i = 0; i < raw.data.size(); ++i) {
          if (raw.data[i] >= classes) {
            throw DataError("mask " + mask_path.string() + " has class " +
                            std::to_string(raw.data[i]) + " outside [0, " +
                            std::to_string(classes) + ")");
          }
          mask.data[i] = static_cast<uint8_t>(raw.data[i]);
        }
        s.mask = std::move(mask);
      }
      samples.push_back(std::move(s));
    }
  }
  std::sort(samples.begin(), samples.end(), [](const Sample& a, const Sample& b) {
    return std::tie(a.case_id, a.slice_index) < std::tie(b.case_id, b.slice_index);
  });
  return samples;
}

void SplitManifest::validate() const {
  std::set<std::string> seen;
  for (const auto* list : {&labelled, &unlabelled, &validation, &test}) {
    for (const auto& id : *list) {
      if (!seen.insert(id).second) {
        throw DataError("split manifest: case '" + id + "' appears more than once");
      }
    }
  }
}

nlohmann::json SplitManifest::to_json() const {
  return {{"labelled", labelled},
          {"unlabelled", unlabelled},
          {"validation", validation},
          {"test", test}};
}

SplitManifest SplitManifest::from_json(const nlohmann::json& j) {
  static const std::set<std::string> known = {"labelled", "unlabelled", "validation", "test"};
  if (!j.is_object()) throw DataError("split manifest must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw DataError("split manifest: unknown key '" + key + "'");
  }
  SplitManifest m;
  try {
    m.labelled = j.value("labelled", std::vector<std::string>{});
    m.unlabelled = j.value("unlabelled", std::vector<std::string>{});
    m.validation = j.value("validation", std::vector<std::string>{});
    m.test = j.value("test", std::vector<std::string>{});
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("split manifest: ") + e.what());
  }
  m.validate();
  return m;
}

SplitManifest SplitManifest::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open split manifest " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("split manifest " + path.string() + ": " + e.what());
  }
}

void SplitManifest::save(const fs::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write split manifest " + path.string());
  out << to_json().dump(2) << '\n';
}

DatasetSplit split(const std::vector<Sample>& samples, const SplitManifest& manifest) {
  manifest.validate();
  enum Subset { Labelled, Unlabelled, Validation, Test };
  std::map<std::string, Subset> assignment;
  for (const auto& id : manifest.labelled) assignment[id] = Labelled;
  for (const auto& id : manifest.unlabelled) assignment[id] = Unlabelled;
  for (const auto& id : manifest.validation) assignment[id] = Validation;
  for (const auto& id : manifest.test) assignment[id] = Test;

  std::set<std::string> present;
  for (const auto& s : samples) present.insert(s.case_id);
  for (const auto& [id, _] : assignment) {
    if (!present.contains(id)) throw DataError("split: manifest case '" + id + "' has no samples");
  }

  DatasetSplit out;
  for (const auto& s : samples) {
    auto it = assignment.find(s.case_id);
    if (it == assignment.end()) continue;
    switch (it->second) {
      case Labelled: out.labelled.push_back(s); break;
      case Unlabelled: {
        auto copy = s;
        copy.mask.reset();
        out.unlabelled.push_back(std::move(copy));
        break;
      }
      case Validation: out.validation.push_back(s); break;
      case Test: out.test.push_back(s); break;
    }
  }
  return out;
}

}  // namespace semamba::data
