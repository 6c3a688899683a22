#include "vistatest/vista.h"

#include <gtest/gtest.h>

TEST(Stub, vista) { SUCCEED(); }
