#include "core/image.hpp"

#include <csetjmp>
#include <cstring>

#include <jpeglib.h>
#include <png.h>

#include "core/error.hpp"
#include "core/io.hpp"

namespace scnn {

namespace {

// ---- PNG ----

struct PngSource {
  const uint8_t* data;
  size_t size;
  size_t pos;
};

void png_read_from_memory(png_structp png, png_bytep out, png_size_t n) {
  auto* src = static_cast<PngSource*>(png_get_io_ptr(png));
  if (src->pos + n > src->size) {
    png_error(png, "unexpected end of PNG stream");
    return;
  }
  std::memcpy(out, src->data + src->pos, n);
  src->pos += n;
}

struct PngErrorCtx {
  std::jmp_buf jump;
  std::string message;
};

void png_error_handler(png_structp png, png_const_charp msg) {
  auto* ctx = static_cast<PngErrorCtx*>(png_get_error_ptr(png));
  ctx->message = msg ? msg : "unknown PNG error";
  std::longjmp(ctx->jump, 1);
}

void png_warning_handler(png_structp, png_const_charp) {}

Image decode_png(const uint8_t* bytes, size_t size) {
  PngErrorCtx errctx;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &errctx, png_error_handler,
                                           png_warning_handler);
  if (!png) raise(ErrorCode::data, "PNG decoder initialization failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    raise(ErrorCode::data, "PNG decoder initialization failed");
  }
  PngSource src{bytes, size, 0};
  std::vector<png_byte> rowbuf;
  Image img;
  if (setjmp(errctx.jump)) {
    png_destroy_read_struct(&png, &info, nullptr);
    raise(ErrorCode::data, "PNG decode error near byte offset " + std::to_string(src.pos) + ": " +
                               errctx.message);
  }
  png_set_read_fn(png, &src, png_read_from_memory);
  png_read_info(png, info);

  png_set_strip_16(png);
  png_set_packing(png);
  png_set_palette_to_rgb(png);
  if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY ||
      png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  img = Image(static_cast<int64_t>(w), static_cast<int64_t>(h));
  rowbuf.resize(png_get_rowbytes(png, info));
  for (png_uint_32 y = 0; y < h; ++y) {
    png_read_row(png, rowbuf.data(), nullptr);
    for (png_uint_32 x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        img.at(y, x, c) = static_cast<float>(rowbuf[x * 3 + c]) / 255.0f;
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

// ---- JPEG ----

struct JpegErrorCtx {
  jpeg_error_mgr mgr;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* ctx = reinterpret_cast<JpegErrorCtx*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, ctx->message);
  std::longjmp(ctx->jump, 1);
}

Image decode_jpeg(const uint8_t* bytes, size_t size) {
  jpeg_decompress_struct cinfo;
  JpegErrorCtx errctx;
  cinfo.err = jpeg_std_error(&errctx.mgr);
  errctx.mgr.error_exit = jpeg_error_exit;
  errctx.mgr.output_message = [](j_common_ptr) {};
  if (setjmp(errctx.jump)) {
    jpeg_destroy_decompress(&cinfo);
    raise(ErrorCode::data, std::string("JPEG decode error: ") + errctx.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, const_cast<uint8_t*>(bytes), static_cast<unsigned long>(size));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);

  Image img(static_cast<int64_t>(cinfo.output_width), static_cast<int64_t>(cinfo.output_height));
  std::vector<JSAMPLE> rowbuf(static_cast<size_t>(cinfo.output_width) * 3);
  JSAMPROW rows[1] = {rowbuf.data()};
  while (cinfo.output_scanline < cinfo.output_height) {
    const int64_t y = cinfo.output_scanline;
    jpeg_read_scanlines(&cinfo, rows, 1);
    for (int64_t x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c)
        img.at(y, x, c) = static_cast<float>(rowbuf[static_cast<size_t>(x * 3 + c)]) / 255.0f;
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return img;
}

} // namespace

Image decode_image(const uint8_t* bytes, size_t size) {
  if (size >= 8 && std::memcmp(bytes, "\x89PNG\r\n\x1a\n", 8) == 0) return decode_png(bytes, size);
  if (size >= 2 && bytes[0] == 0xff && bytes[1] == 0xd8) return decode_jpeg(bytes, size);
  raise(ErrorCode::data, "unrecognized image payload (expected PNG or JPEG)");
}

Image decode_image_file(const std::string& path) {
  std::vector<uint8_t> bytes;
  try {
    bytes = read_binary_file(path);
  } catch (const Error& e) {
    raise(ErrorCode::data, e.what());
  }
  try {
    return decode_image(bytes.data(), bytes.size());
  } catch (const Error& e) {
    raise(e.code(), "decoding '" + path + "': " + e.what());
  }
}

void encode_png(const Image& img, const std::string& path) {
  if (img.width < 1 || img.height < 1) raise(ErrorCode::config, "encode_png: empty image");
  PngErrorCtx errctx;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &errctx, png_error_handler,
                                            png_warning_handler);
  if (!png) raise(ErrorCode::io, "PNG encoder initialization failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    raise(ErrorCode::io, "PNG encoder initialization failed");
  }
  std::vector<uint8_t> out;
  if (setjmp(errctx.jump)) {
    png_destroy_write_struct(&png, &info);
    raise(ErrorCode::io, "PNG encode error: " + errctx.message);
  }
  png_set_write_fn(
      png, &out,
      [](png_structp p, png_bytep data, png_size_t n) {
        auto* buf = static_cast<std::vector<uint8_t>*>(png_get_io_ptr(p));
        buf->insert(buf->end(), data, data + n);
      },
      [](png_structp) {});
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_byte> row(static_cast<size_t>(img.width) * 3);
  for (int64_t y = 0; y < img.height; ++y) {
    for (int64_t x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) {
        float v = img.at(y, x, c);
        v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
        row[static_cast<size_t>(x * 3 + c)] = static_cast<png_byte>(v * 255.0f + 0.5f);
      }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  write_binary_file_atomic(path, out.data(), out.size());
}

} // namespace scnn
