#include "vistatest/criticality.h"

#include <gtest/gtest.h>

TEST(Stub, criticality) { SUCCEED(); }
