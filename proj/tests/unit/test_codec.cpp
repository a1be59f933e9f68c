#include "doctest.h"
#include "edgemesh/codec.hpp"

using namespace edgemesh;

TEST_CASE("codec roundtrips primitives") {
  Encoder e;
  e.u8(0xab);
  e.u32(0xdeadbeef);
  e.u64(0x0123456789abcdefULL);
  e.f64(3.14159);
  e.bytes("hello");
  e.bytes("");
  const Bytes buf = e.take();

  Decoder d(buf);
  CHECK(d.u8() == 0xab);
  CHECK(d.u32() == 0xdeadbeef);
  CHECK(d.u64() == 0x0123456789abcdefULL);
  CHECK(d.f64() == 3.14159);  // bit-exact roundtrip
  CHECK(d.bytes() == "hello");
  CHECK(d.bytes() == "");
  CHECK(d.done());
}

TEST_CASE("decoder flags truncated input instead of reading past the end") {
  Encoder e;
  e.u64(42);
  Bytes buf = e.take();
  buf.resize(5);

  Decoder d(buf);
  CHECK(d.u64() == 0);
  CHECK(!d.ok());
  CHECK(!d.done());
}

TEST_CASE("decoder rejects byte strings with lying length prefixes") {
  Encoder e;
  e.u32(1000);  // claims 1000 bytes follow
  e.raw("abc");
  const Bytes buf = e.take();  // decoder views the buffer, it must outlive it
  Decoder d(buf);
  CHECK(d.bytes().empty());
  CHECK(!d.ok());
}

TEST_CASE("equal values encode identically") {
  Encoder a, b;
  a.u64(7);
  a.bytes("x");
  b.u64(7);
  b.bytes("x");
  CHECK(a.view() == b.view());
}
