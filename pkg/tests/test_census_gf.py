import unittest
from unittest.mock import patch

import numpy as np

import cubic_census.census_gf as census_gf
from cubic_census.census_errors import (
    FieldDivisionByZeroError,
    IncompatibleFieldsError,
    MalformedInputError,
    ReducibleModulusError,
    UnsupportedFieldError,
)
from cubic_census.census_gf import (
    arith,
    artin_schreier_table,
    embed,
    embed_table,
    extension_field,
    field_create,
    format_element,
    lane_width,
    linear_combination,
    parse_element,
    pth_root_table,
    sqrt_table,
    sum_elements,
)

try:
    import galois
except ImportError:
    galois = None

SMALL_FIELDS = [(2, 1), (3, 1), (5, 1), (7, 1), (2, 2), (2, 3), (3, 2), (2, 4), (13, 1)]


class FieldArithmeticTests(unittest.TestCase):
    def test_gf4_generator_satisfies_its_modulus(self):
        ctx = field_create(2, 2)

        self.assertEqual(ctx.modulus, (1, 1, 1))
        self.assertEqual(ctx.mul(2, 2), 3)
        self.assertEqual(ctx.inv(2), 3)
        self.assertEqual(ctx.add(2, 3), 1)

    def test_field_axioms_hold_exhaustively_on_small_fields(self):
        for p, k in SMALL_FIELDS:
            with self.subTest(q=p**k):
                ctx = field_create(p, k)
                a = ctx.elements()[:, None, None]
                b = ctx.elements()[None, :, None]
                c = ctx.elements()[None, None, :]

                self.assertTrue(np.array_equal(ctx.add_array(a, b), ctx.add_array(b, a)))
                self.assertTrue(np.array_equal(ctx.mul_array(a, b), ctx.mul_array(b, a)))
                left = ctx.mul_array(a, ctx.add_array(b, c))
                right = ctx.add_array(ctx.mul_array(a, b), ctx.mul_array(a, c))
                self.assertTrue(np.array_equal(left, right))
                self.assertTrue(
                    np.array_equal(ctx.mul_array(ctx.mul_array(a, b), c), ctx.mul_array(a, ctx.mul_array(b, c)))
                )
                nonzero = ctx.elements()[1:]
                self.assertTrue(np.all(ctx.mul_array(nonzero, ctx.inv_array(nonzero)) == 1))
                self.assertTrue(np.all(ctx.add_array(ctx.elements(), ctx.neg_array(ctx.elements())) == 0))

    def test_frobenius_is_additive_and_fixes_the_prime_field(self):
        ctx = field_create(3, 2)
        for a in range(ctx.q):
            for b in range(ctx.q):
                self.assertEqual(ctx.frobenius(ctx.add(a, b)), ctx.add(ctx.frobenius(a), ctx.frobenius(b)))
        self.assertEqual([ctx.frobenius(a) for a in range(3)], [0, 1, 2])
        self.assertEqual(ctx.frobenius(ctx.frobenius(5)), 5)

    def test_pow_and_division(self):
        ctx = field_create(2, 4)

        self.assertEqual(ctx.pow(7, ctx.q - 1), 1)
        self.assertEqual(ctx.pow(0, 0), 1)
        self.assertEqual(ctx.mul(ctx.div(9, 6), 6), 9)
        with self.assertRaises(FieldDivisionByZeroError):
            ctx.inv(0)
        with self.assertRaises(FieldDivisionByZeroError):
            ctx.div(3, 0)

    def test_arith_dispatches_and_rejects_unknown_operations(self):
        ctx = field_create(2, 2)

        self.assertEqual(arith(ctx, "mul", 2, 2), 3)
        self.assertEqual(arith(ctx, "add", 2, 3), 1)
        self.assertEqual(arith(ctx, "inv", 3), 2)
        self.assertEqual(arith(ctx, "frobenius", 2), 3)
        with self.assertRaisesRegex(ValueError, "op must be one of"):
            arith(ctx, "sqrt", 2)
        with self.assertRaises(MalformedInputError):
            arith(ctx, "add", 4, 1)


class FieldConstructionTests(unittest.TestCase):
    def test_rejects_non_prime_characteristic_and_oversized_fields(self):
        with self.assertRaises(UnsupportedFieldError):
            field_create(6)
        with self.assertRaises(UnsupportedFieldError):
            field_create(2, 17)

    def test_supplied_modulus_is_validated(self):
        with self.assertRaises(ReducibleModulusError):
            field_create(2, 2, (1, 0, 1))
        with self.assertRaises(MalformedInputError):
            field_create(2, 2, (1, 1, 0))
        ctx = field_create(3, 2, (2, 2, 1))

        self.assertEqual(ctx.modulus_source, "supplied")
        self.assertEqual(ctx.mul(3, 3), ctx.sub(0, ctx.add(ctx.mul(2, 3), 2)))

    def test_modulus_sources(self):
        self.assertEqual(field_create(2, 2).modulus_source, "table")
        self.assertEqual(field_create(5).modulus, (0, 1))
        searched = field_create(2, 5)

        self.assertEqual(searched.modulus_source, "search")
        self.assertEqual(searched.modulus, (1, 0, 1, 0, 0, 1))

    def test_reducible_table_entry_falls_back_to_search(self):
        field_create.cache_clear()
        try:
            with patch.dict(census_gf.BUILTIN_MODULI, {(3, 3): (0, 0, 0, 1)}):
                with self.assertLogs("cubic_census.census_gf", level="WARNING") as logs:
                    ctx = field_create(3, 3)
        finally:
            field_create.cache_clear()

        self.assertEqual(ctx.modulus_source, "search")
        self.assertEqual(ctx.modulus, (1, 2, 0, 1))
        self.assertIn("falling back", logs.output[0])

    def test_equal_fields_compare_equal_and_extension_fields_grow_the_degree(self):
        self.assertEqual(field_create(2, 2), field_create(2, 2, (1, 1, 1)))
        self.assertEqual(extension_field(field_create(2, 2), 2).q, 16)
        self.assertIs(extension_field(field_create(3), 1), field_create(3))


class ElementFormatTests(unittest.TestCase):
    def test_digits_are_written_most_significant_first(self):
        ctx = field_create(2, 2)

        self.assertEqual(format_element(ctx, 2), "10")
        self.assertEqual(parse_element(ctx, "11"), 3)
        self.assertEqual(format_element(field_create(7), 5), "5")

    def test_large_characteristic_uses_colon_separated_digits(self):
        ctx = field_create(11, 2)

        self.assertEqual(format_element(ctx, 3 * 11 + 5), "3:5")
        self.assertEqual(parse_element(ctx, "3:5"), 38)

    def test_malformed_elements_are_rejected(self):
        ctx = field_create(2, 2)
        for text in ("2", "101", "x1", ""):
            with self.subTest(text=text):
                with self.assertRaises(MalformedInputError):
                    parse_element(ctx, text)


class EmbeddingTests(unittest.TestCase):
    def test_embedding_is_a_field_homomorphism(self):
        source = field_create(2, 2)
        target = field_create(2, 4)
        images = embed_table(source, target)

        self.assertEqual(len(set(images.tolist())), source.q)
        for a in range(source.q):
            for b in range(source.q):
                self.assertEqual(images[source.mul(a, b)], target.mul(int(images[a]), int(images[b])))
                self.assertEqual(images[source.add(a, b)], target.add(int(images[a]), int(images[b])))

    def test_prime_field_embeds_as_itself(self):
        self.assertEqual(embed(2, field_create(3), field_create(3, 2)), 2)

    def test_incompatible_fields_are_rejected(self):
        with self.assertRaises(IncompatibleFieldsError):
            embed_table(field_create(2, 2), field_create(2, 3))
        with self.assertRaises(IncompatibleFieldsError):
            embed_table(field_create(2), field_create(3, 2))

    def test_embedding_commutes_with_frobenius(self):
        for (p, k), d in (((2, 1), 3), ((2, 2), 2), ((3, 2), 2), ((5, 1), 2)):
            with self.subTest(q=p**k, d=d):
                source = field_create(p, k)
                target = field_create(p, k * d)
                images = embed_table(source, target)

                for a in range(source.q):
                    self.assertEqual(images[source.frobenius(a)], target.frobenius(int(images[a])))

    def test_gf4_generator_image_is_a_root_of_the_gf4_modulus(self):
        target = field_create(2, 4)
        image = embed(2, field_create(2, 2), target)

        self.assertEqual(target.add(target.add(target.mul(image, image), image), 1), 0)

    def test_linear_combination_matches_elementwise_arithmetic(self):
        rng = np.random.default_rng(7)
        for (p, k), (tp, tk), terms in (
            ((2, 2), (2, 4), 3),
            ((3, 1), (3, 2), 12),
            ((5, 2), (5, 2), 9),
            ((3, 2), (3, 4), 20),
            ((7, 1), (7, 1), 5),
        ):
            with self.subTest(source=p**k, target=tp**tk):
                source = field_create(p, k)
                target = field_create(tp, tk)
                values = rng.integers(0, target.q, size=(5, terms))
                coeffs = rng.integers(0, source.q, size=(4, terms))
                images = embed_table(source, target)

                combined = linear_combination(target, values, coeffs, source)

                for n in range(5):
                    for m in range(4):
                        expected = 0
                        for j in range(terms):
                            expected = target.add(expected, target.mul(int(images[coeffs[m, j]]), int(values[n, j])))
                        self.assertEqual(combined[n, m], expected)

    def test_long_sums_fall_back_to_digit_arithmetic(self):
        ctx = field_create(5, 6)
        rng = np.random.default_rng(11)
        values = rng.integers(0, ctx.q, size=(3, 300))

        self.assertIsNone(lane_width(ctx, 300))
        self.assertIsNotNone(lane_width(ctx, 10))
        summed = sum_elements(ctx, values)
        for row in range(3):
            expected = 0
            for value in values[row]:
                expected = ctx.add(expected, int(value))
            self.assertEqual(summed[row], expected)


class RootTableTests(unittest.TestCase):
    def test_square_roots_in_odd_characteristic(self):
        ctx = field_create(3, 2)
        table = sqrt_table(ctx)

        for a in range(ctx.q):
            root = int(table[a])
            if root >= 0:
                self.assertEqual(ctx.mul(root, root), a)
        self.assertEqual(int((table < 0).sum()), (ctx.q - 1) // 2)

    def test_square_roots_always_exist_in_characteristic_two(self):
        ctx = field_create(2, 3)
        roots = pth_root_table(ctx)

        for a in range(ctx.q):
            self.assertEqual(ctx.mul(int(roots[a]), int(roots[a])), a)

    def test_artin_schreier_solutions(self):
        ctx = field_create(2, 3)
        table = artin_schreier_table(ctx)

        for a in range(ctx.q):
            u = int(table[a])
            if u >= 0:
                self.assertEqual(ctx.add(ctx.mul(u, u), u), a)
        self.assertEqual(int((table >= 0).sum()), ctx.q // 2)
        with self.assertRaises(IncompatibleFieldsError):
            artin_schreier_table(field_create(3))


@unittest.skipIf(galois is None, "galois is not installed")
class GaloisOracleTests(unittest.TestCase):
    def test_multiplication_tables_match_galois(self):
        for p, k, poly in ((2, 3, "x^3 + x + 1"), (2, 4, "x^4 + x + 1")):
            with self.subTest(q=p**k):
                ctx = field_create(p, k)
                oracle = galois.GF(p**k, irreducible_poly=poly)
                a = np.repeat(ctx.elements(), ctx.q)
                b = np.tile(ctx.elements(), ctx.q)

                expected = np.asarray(oracle(a) * oracle(b), dtype=np.int64)
                self.assertTrue(np.array_equal(ctx.mul_array(a, b), expected))
                self.assertTrue(np.array_equal(ctx.add_array(a, b), np.asarray(oracle(a) + oracle(b), dtype=np.int64)))


if __name__ == "__main__":
    unittest.main()
