#pragma once

#include "afcest/adaptivity.hpp"
#include "afcest/afc.hpp"
#include "afcest/assembly.hpp"
#include "afcest/checks.hpp"
#include "afcest/cli.hpp"
#include "afcest/estimators.hpp"
#include "afcest/linalg.hpp"
#include "afcest/mesh.hpp"
#include "afcest/problems.hpp"
#include "afcest/supg.hpp"
