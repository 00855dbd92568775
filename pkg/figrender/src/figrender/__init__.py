from .render import FIGURE_IDS, FigureSpec, RenderInputError, build_figure, load_rows, render

__version__ = "0.1.0"
