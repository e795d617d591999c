#include "planefield/tensor.hpp"

#include <bit>
#include <fstream>

#include <json.hpp>

namespace planefield {

static_assert(std::endian::native == std::endian::little,
              "parameter blobs are little-endian");

void save_params(const LayerParams& params,
                 const std::filesystem::path& manifest_path) {
  nlohmann::json manifest;
  manifest["module"] = params.module;
  manifest["seed"] = params.seed;
  manifest["meta"] = params.meta;

  std::filesystem::path blob_path = manifest_path;
  blob_path.replace_extension(".bin");
  manifest["blob"] = blob_path.filename().string();

  nlohmann::json entries = nlohmann::json::array();
  std::size_t offset = 0;
  std::ofstream blob(blob_path, std::ios::binary);
  if (!blob) {
    throw IoError("cannot open parameter blob for writing: " +
                  blob_path.string());
  }
  for (const auto& [name, tensor] : params.entries) {
    nlohmann::json entry;
    entry["name"] = name;
    entry["shape"] = tensor.shape();
    entry["offset_bytes"] = offset;
    entry["count"] = tensor.size();
    entries.push_back(entry);
    blob.write(reinterpret_cast<const char*>(tensor.data()),
               static_cast<std::streamsize>(tensor.size() * sizeof(double)));
    offset += static_cast<std::size_t>(tensor.size()) * sizeof(double);
  }
  if (!blob) {
    throw IoError("failed writing parameter blob: " + blob_path.string());
  }
  manifest["entries"] = entries;

  std::ofstream out(manifest_path);
  if (!out) {
    throw IoError("cannot open parameter manifest for writing: " +
                  manifest_path.string());
  }
  out << manifest.dump(2) << "\n";
}

LayerParams load_params(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) {
    throw IoError("cannot open parameter manifest: " + manifest_path.string());
  }
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("invalid parameter manifest: ") + e.what(),
                      0);
  }

  LayerParams params;
  try {
    params.module = manifest.at("module").get<std::string>();
    params.seed = manifest.at("seed").get<std::uint64_t>();
    if (manifest.contains("meta")) {
      params.meta =
          manifest.at("meta").get<std::map<std::string, std::int64_t>>();
    }
    const std::filesystem::path blob_path =
        manifest_path.parent_path() /
        manifest.at("blob").get<std::string>();
    std::ifstream blob(blob_path, std::ios::binary);
    if (!blob) {
      throw IoError("cannot open parameter blob: " + blob_path.string());
    }
    for (const auto& entry : manifest.at("entries")) {
      const auto name = entry.at("name").get<std::string>();
      const auto shape = entry.at("shape").get<std::vector<int>>();
      const auto offset = entry.at("offset_bytes").get<std::size_t>();
      const auto count = entry.at("count").get<std::int64_t>();
      Tensor tensor(shape);
      if (tensor.size() != count) {
        throw FormatError("parameter entry count does not match its shape",
                          offset);
      }
      blob.seekg(static_cast<std::streamoff>(offset));
      blob.read(reinterpret_cast<char*>(tensor.data()),
                static_cast<std::streamsize>(count * sizeof(double)));
      if (!blob) {
        throw FormatError("parameter blob truncated", offset);
      }
      params.entries.emplace(name, std::move(tensor));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("invalid parameter manifest: ") + e.what(),
                      0);
  }
  return params;
}

}  // namespace planefield
