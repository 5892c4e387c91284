#include "egopose/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "egopose/check.hpp"

namespace egopose {

namespace {

constexpr char kMagic[4] = {'E', 'P', 'C', 'K'};

template <typename T>
void write_pod(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  EGOPOSE_CHECK(in.good(), "checkpoint: truncated file");
  return v;
}

}  // namespace

void Checkpoint::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  EGOPOSE_CHECK(out.good(), "checkpoint: cannot open for write: " + path.string());
  out.write(kMagic, 4);
  write_pod<uint32_t>(out, kVersion);

  const std::string header = kind + "\n" + config_json;
  write_pod<uint64_t>(out, header.size());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));

  write_pod<uint64_t>(out, arrays.size());
  for (const auto& [name, tensor] : arrays) {
    write_pod<uint32_t>(out, static_cast<uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod<uint32_t>(out, static_cast<uint32_t>(tensor.shape().size()));
    for (int64_t d : tensor.shape()) write_pod<uint64_t>(out, static_cast<uint64_t>(d));
    out.write(reinterpret_cast<const char*>(tensor.data()),
              static_cast<std::streamsize>(tensor.numel() * sizeof(float)));
  }
  EGOPOSE_CHECK(out.good(), "checkpoint: write failed: " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  EGOPOSE_CHECK(in.good(), "checkpoint: cannot open: " + path.string());
  char magic[4];
  in.read(magic, 4);
  EGOPOSE_CHECK(in.good() && std::memcmp(magic, kMagic, 4) == 0,
                "checkpoint: bad magic in " + path.string());
  const uint32_t version = read_pod<uint32_t>(in);
  EGOPOSE_CHECK(version == kVersion,
                "checkpoint: unsupported version " + std::to_string(version));

  Checkpoint ck;
  const uint64_t header_len = read_pod<uint64_t>(in);
  std::string header(header_len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_len));
  EGOPOSE_CHECK(in.good(), "checkpoint: truncated header");
  const size_t nl = header.find('\n');
  EGOPOSE_CHECK(nl != std::string::npos, "checkpoint: malformed header");
  ck.kind = header.substr(0, nl);
  ck.config_json = header.substr(nl + 1);

  const uint64_t count = read_pod<uint64_t>(in);
  for (uint64_t i = 0; i < count; ++i) {
    const uint32_t name_len = read_pod<uint32_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const uint32_t ndim = read_pod<uint32_t>(in);
    Shape shape(ndim);
    for (uint32_t d = 0; d < ndim; ++d) shape[d] = static_cast<int64_t>(read_pod<uint64_t>(in));
    Tensor t(shape);
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.numel() * sizeof(float)));
    EGOPOSE_CHECK(in.good(), "checkpoint: truncated array " + name);
    ck.arrays.emplace(std::move(name), std::move(t));
  }
  return ck;
}

void Checkpoint::put_params(const nn::ParamCollector& params) {
  for (const auto& np : params.params) {
    arrays[np.name] = np.param->var.val();
  }
  for (const auto& nb : params.buffers) {
    arrays[nb.name] = *nb.tensor;
  }
}

void Checkpoint::restore_params(const nn::ParamCollector& params) const {
  auto fetch = [&](const std::string& name) -> const Tensor& {
    auto it = arrays.find(name);
    EGOPOSE_CHECK(it != arrays.end(), "checkpoint: missing array " + name);
    return it->second;
  };
  for (const auto& np : params.params) {
    const Tensor& src = fetch(np.name);
    EGOPOSE_CHECK(src.same_shape(np.param->var.val()),
                  "checkpoint: shape mismatch for " + np.name + ": stored " +
                      shape_str(src.shape()) + " vs model " +
                      shape_str(np.param->var.val().shape()));
    np.param->var.val() = src;
  }
  for (const auto& nb : params.buffers) {
    const Tensor& src = fetch(nb.name);
    EGOPOSE_CHECK(src.same_shape(*nb.tensor), "checkpoint: shape mismatch for " + nb.name);
    *nb.tensor = src;
  }
}

uint64_t params_hash(const nn::ParamCollector& params, const std::string& prefix) {
  uint64_t h = 1469598103934665603ULL;
  auto mix_bytes = [&h](const void* data, size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < bytes; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& np : params.params) {
    if (np.name.rfind(prefix, 0) != 0) continue;
    mix_bytes(np.name.data(), np.name.size());
    mix_bytes(np.param->var.val().data(), np.param->var.val().numel() * sizeof(float));
  }
  return h;
}

}  // namespace egopose
