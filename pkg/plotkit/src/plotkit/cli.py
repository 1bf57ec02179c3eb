"""plotkit <recipe.json>: render one figure from bandgap CLI artifacts."""

from __future__ import annotations

import argparse
import json
import sys

from .recipes import FigureRecipe, RecipeError, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plotkit",
        description="Render a figure recipe (JSON) from bandgap CSV artifacts")
    parser.add_argument("recipe", help="path to a recipe JSON file")
    args = parser.parse_args(argv)
    try:
        with open(args.recipe, encoding="utf-8") as fh:
            data = json.load(fh)
        recipe = FigureRecipe.from_dict(data)
        result = render(recipe)
    except (OSError, json.JSONDecodeError, RecipeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps({"output": recipe.output, "annotations": result}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
