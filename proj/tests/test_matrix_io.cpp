#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "uampmf/datagen.hpp"
#include "uampmf/matrix_io.hpp"

using namespace uampmf;

TEST(MatrixText, RoundTripIsExact) {
  Rng rng(1);
  const Matrix m = gen_gaussian(5, 3, rng) * 1e-7;
  std::stringstream ss;
  write_matrix_text(ss, m);
  EXPECT_EQ(read_matrix_text(ss), m);
}

TEST(MatrixText, HeaderLayout) {
  std::stringstream ss;
  write_matrix_text(ss, (Matrix(2, 2) << 1, 2, 3, 4).finished());
  EXPECT_EQ(ss.str(), "2 2\n1 2\n3 4\n");
}

TEST(MatrixCsv, RoundTripIsExact) {
  Rng rng(2);
  const Matrix m = gen_gaussian(4, 6, rng) * 3.3e5;
  std::stringstream ss;
  write_matrix_csv(ss, m);
  EXPECT_EQ(read_matrix_csv(ss), m);
}

TEST(MatrixText, MalformedInputIsRejected) {
  std::stringstream a("2 2\n1 2\n3\n");
  EXPECT_THROW(read_matrix_text(a), FormatError);
  std::stringstream b("x y\n");
  EXPECT_THROW(read_matrix_text(b), FormatError);
  std::stringstream c("1 1\n1 2\n");
  EXPECT_THROW(read_matrix_text(c), FormatError);
  std::stringstream d("1,2\n3\n");
  EXPECT_THROW(read_matrix_csv(d), FormatError);
  std::stringstream e("1,abc\n");
  EXPECT_THROW(read_matrix_csv(e), FormatError);
}

TEST(MatrixFiles, ExtensionPicksFormat) {
  const auto dir = std::filesystem::temp_directory_path() / "uampmf_io_test";
  std::filesystem::create_directories(dir);
  Rng rng(3);
  const Matrix m = gen_gaussian(3, 4, rng);
  for (const char* name : {"m.txt", "m.csv"}) {
    const std::string path = (dir / name).string();
    save_matrix(path, m);
    EXPECT_EQ(load_matrix(path), m);
  }
  EXPECT_THROW(load_matrix((dir / "absent.txt").string()), FormatError);
  std::filesystem::remove_all(dir);
}
