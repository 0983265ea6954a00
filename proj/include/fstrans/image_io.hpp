#pragma once

#include <filesystem>
#include <vector>

#include <torch/torch.h>

namespace fstrans {

/// Interleaved 8-bit RGB.
struct RawImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;
};

bool is_image_file(const std::filesystem::path& p);

/// Decodes a PNG or JPEG file (dispatch on magic bytes). Throws RuntimeFailure
/// on unreadable or corrupt data.
RawImage read_image(const std::filesystem::path& path);

void write_png(const std::filesystem::path& path, const RawImage& img);

/// u8 [0,255] -> float32 [-1,1], shape [3,H,W]. Inverse rounds to nearest,
/// so u8 -> tensor -> u8 is exact.
torch::Tensor to_unit_tensor(const RawImage& img);
RawImage to_raw_image(const torch::Tensor& chw);

/// Decode + bilinear resize to size x size + normalize.
torch::Tensor load_image_tensor(const std::filesystem::path& path, int image_size);

void save_image(const std::filesystem::path& path, const torch::Tensor& chw);

/// Writes one PNG laying the rows out side by side; every cell is a [3,H,W]
/// tensor in [-1,1]. Used for the (class images | content | output) panels.
void write_image_grid(const std::filesystem::path& path,
                      const std::vector<std::vector<torch::Tensor>>& rows);

}  // namespace fstrans
