#include "fstrans/image_io.hpp"

#include <csetjmp>
#include <cstdio>
#include <cstring>

#include <jpeglib.h>
#include <png.h>

#include "fstrans/config.hpp"

namespace fstrans {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

RawImage read_png_file(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw RuntimeFailure("cannot open " + path.string());

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw RuntimeFailure("libpng init failed");
  }
  RawImage img;
  std::vector<png_bytep> row_ptrs;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw RuntimeFailure("corrupt PNG: " + path.string());
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);

  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  img.pixels.resize(static_cast<std::size_t>(img.width) * img.height * 3);
  row_ptrs.resize(img.height);
  for (int y = 0; y < img.height; ++y)
    row_ptrs[y] = img.pixels.data() + static_cast<std::size_t>(y) * img.width * 3;
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

struct JpegErrorMgr {
  jpeg_error_mgr pub;
  std::jmp_buf jmp;
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
  std::longjmp(err->jmp, 1);
}

RawImage read_jpeg_file(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw RuntimeFailure("cannot open " + path.string());

  jpeg_decompress_struct cinfo;
  JpegErrorMgr jerr;
  cinfo.err = jpeg_std_error(&jerr.pub);
  jerr.pub.error_exit = jpeg_error_exit;
  if (setjmp(jerr.jmp)) {
    jpeg_destroy_decompress(&cinfo);
    throw RuntimeFailure("corrupt JPEG: " + path.string());
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, fp.get());
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);

  RawImage img;
  img.width = static_cast<int>(cinfo.output_width);
  img.height = static_cast<int>(cinfo.output_height);
  img.pixels.resize(static_cast<std::size_t>(img.width) * img.height * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = img.pixels.data() + static_cast<std::size_t>(cinfo.output_scanline) * img.width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return img;
}

}  // namespace

bool is_image_file(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

RawImage read_image(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw RuntimeFailure("cannot open " + path.string());
  unsigned char magic[4] = {0, 0, 0, 0};
  std::size_t got = std::fread(magic, 1, sizeof(magic), fp.get());
  fp.reset();
  if (got >= 4 && png_sig_cmp(magic, 0, 4) == 0) return read_png_file(path);
  if (got >= 2 && magic[0] == 0xFF && magic[1] == 0xD8) return read_jpeg_file(path);
  throw RuntimeFailure("not a PNG or JPEG file: " + path.string());
}

void write_png(const std::filesystem::path& path, const RawImage& img) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw RuntimeFailure("cannot write " + path.string());

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw RuntimeFailure("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw RuntimeFailure("PNG write failed: " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height; ++y)
    png_write_row(png, const_cast<png_bytep>(img.pixels.data() +
                                             static_cast<std::size_t>(y) * img.width * 3));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

torch::Tensor to_unit_tensor(const RawImage& img) {
  auto bytes = torch::from_blob(const_cast<std::uint8_t*>(img.pixels.data()),
                                {img.height, img.width, 3}, torch::kUInt8);
  return bytes.to(torch::kFloat32).permute({2, 0, 1}).div(127.5).sub(1.0).contiguous();
}

RawImage to_raw_image(const torch::Tensor& chw) {
  TORCH_CHECK(chw.dim() == 3 && chw.size(0) == 3, "expected [3,H,W] tensor");
  auto t = chw.detach().to(torch::kFloat32).clamp(-1.0, 1.0);
  t = t.add(1.0).mul(127.5).round().clamp(0, 255).to(torch::kUInt8);
  t = t.permute({1, 2, 0}).contiguous();
  RawImage img;
  img.height = static_cast<int>(chw.size(1));
  img.width = static_cast<int>(chw.size(2));
  img.pixels.assign(t.data_ptr<std::uint8_t>(),
                    t.data_ptr<std::uint8_t>() + t.numel());
  return img;
}

torch::Tensor load_image_tensor(const std::filesystem::path& path, int image_size) {
  auto t = to_unit_tensor(read_image(path));
  if (t.size(1) != image_size || t.size(2) != image_size) {
    namespace F = torch::nn::functional;
    t = F::interpolate(t.unsqueeze(0),
                       F::InterpolateFuncOptions()
                           .size(std::vector<int64_t>{image_size, image_size})
                           .mode(torch::kBilinear)
                           .align_corners(false))
            .squeeze(0);
  }
  return t;
}

void save_image(const std::filesystem::path& path, const torch::Tensor& chw) {
  write_png(path, to_raw_image(chw));
}

void write_image_grid(const std::filesystem::path& path,
                      const std::vector<std::vector<torch::Tensor>>& rows) {
  TORCH_CHECK(!rows.empty() && !rows.front().empty(), "empty grid");
  const int64_t h = rows.front().front().size(1);
  const int64_t w = rows.front().front().size(2);
  const int pad = 2;
  std::size_t n_cols = 0;
  for (const auto& r : rows) n_cols = std::max(n_cols, r.size());

  auto canvas = torch::ones({3, static_cast<int64_t>(rows.size()) * (h + pad) - pad,
                             static_cast<int64_t>(n_cols) * (w + pad) - pad});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      canvas.index_put_({torch::indexing::Slice(),
                         torch::indexing::Slice(r * (h + pad), r * (h + pad) + h),
                         torch::indexing::Slice(c * (w + pad), c * (w + pad) + w)},
                        rows[r][c].detach().cpu());
    }
  }
  save_image(path, canvas);
}

}  // namespace fstrans
