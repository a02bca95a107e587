#pragma once

#include "entail.hpp"
#include "errors.hpp"
#include "io.hpp"
#include "kb.hpp"
#include "marking.hpp"
#include "oracle.hpp"
#include "provcalc.hpp"
#include "query.hpp"
#include "rewrite.hpp"
#include "semiring.hpp"
