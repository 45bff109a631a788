#include "tempdir.hpp"

#include "t2ieval/codec.hpp"
#include "t2ieval/errors.hpp"
#include "t2ieval/image.hpp"

#include <doctest.h>

#include <fstream>
#include <random>

using namespace t2ieval;

TEST_CASE("sha256 known answers") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("base64 known answers and round trip") {
  CHECK(base64_encode("") == "");
  CHECK(base64_encode("f") == "Zg==");
  CHECK(base64_encode("fo") == "Zm8=");
  CHECK(base64_encode("foobar") == "Zm9vYmFy");
  CHECK(base64_decode("Zm9vYg==") == "foob");
  CHECK_THROWS_AS(base64_decode("Zm9"), std::invalid_argument);
  CHECK_THROWS_AS(base64_decode("Zm9v!A=="), std::invalid_argument);
  std::mt19937_64 rng(4);
  for (int t = 0; t < 200; ++t) {
    std::string s(rng() % 70, '\0');
    for (auto& c : s) c = char(rng() & 0xFF);
    REQUIRE(base64_decode(base64_encode(s)) == s);
  }
}

TEST_CASE("png dimensions") {
  const auto d = sniff_dimensions(testing::png_header(512, 384));
  CHECK(d.width == 512);
  CHECK(d.height == 384);
  CHECK_THROWS_AS(sniff_dimensions(testing::png_header(512, 384).substr(0, 20)), ImageDecodeError);
  CHECK_THROWS_AS(sniff_dimensions(testing::png_header(0, 10)), ImageDecodeError);
}

TEST_CASE("jpeg dimensions from the frame header") {
  std::string j("\xFF\xD8", 2);
  j += std::string("\xFF\xE0\x00\x10JFIF\x00\x01\x01\x00\x00\x01\x00\x01\x00\x00", 18);
  j += std::string("\xFF\xC2\x00\x11\x08\x01\x2C\x02\x80\x03\x01\x22\x00\x02\x11\x01\x03\x11\x01", 19);
  const auto d = sniff_dimensions(j);
  CHECK(d.width == 640);
  CHECK(d.height == 300);
  CHECK_THROWS_AS(sniff_dimensions(std::string("\xFF\xD8\xFF\xE0\x00\x10", 6)), ImageDecodeError);
}

TEST_CASE("other formats are rejected") {
  CHECK_THROWS_AS(sniff_dimensions("GIF89a......"), ImageDecodeError);
  CHECK_THROWS_AS(sniff_dimensions(""), ImageDecodeError);
}

TEST_CASE("load_image reads the file") {
  testing::TempDir dir;
  {
    std::ofstream out(dir / "a.png", std::ios::binary);
    out << testing::png_header(7, 9);
  }
  const auto img = load_image(dir / "a.png");
  CHECK(img.width == 7);
  CHECK(img.height == 9);
  CHECK(img.bytes == testing::png_header(7, 9));
  CHECK_THROWS_AS(load_image(dir / "missing.png"), ImageDecodeError);
}

TEST_CASE("committed fixture images") {
  const auto img = load_image(T2IEVAL_FIXTURES "/e2e/images/p1_sd2.png");
  CHECK(img.width == 64);
  CHECK(img.height == 48);
}
