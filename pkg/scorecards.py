"""
scorecards.py - printable SDG goal scorecards (A4, 2x3 grid of cards per page).

Each card shows one goal of one progress report: the mean goal index, the most likely
progress level, a stacked bar of level shares across realizations, and the member
indicators with their mean scores.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
import json
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from reportlab.lib import colors
from reportlab.lib.pagesizes import A4
from reportlab.lib.units import mm
from reportlab.pdfbase import pdfmetrics
from reportlab.pdfgen import canvas

from sdg import GoalProgress, ProgressLevel, ProgressReport
from settings import DATA_DIR


SCORECARD_LAYOUT_JSON = DATA_DIR / "scorecard_layout.json"

LEVEL_COLORS: Dict[ProgressLevel, colors.Color] = {
    ProgressLevel.DETERIORATING: colors.Color(0.80, 0.22, 0.20),
    ProgressLevel.STAGNATING: colors.Color(0.93, 0.60, 0.18),
    ProgressLevel.IMPROVING: colors.Color(0.95, 0.82, 0.25),
    ProgressLevel.ON_TRACK: colors.Color(0.22, 0.60, 0.30),
}

FONT_REGULAR = "Helvetica"
FONT_BOLD = "Helvetica-Bold"


@dataclass(frozen=True)
class Rect:
    x: float
    y: float
    w: float
    h: float

    @property
    def top(self) -> float:
        return self.y + self.h

    @property
    def center_x(self) -> float:
        return self.x + (self.w / 2.0)

    def inset(self, dx: float = 0.0, dy: float = 0.0) -> "Rect":
        return Rect(self.x + dx, self.y + dy, self.w - (2.0 * dx), self.h - (2.0 * dy))


@dataclass(frozen=True)
class ScorecardLayout:
    cols: int = 2
    rows: int = 3
    card_w_mm: float = 95.0
    card_h_mm: float = 88.0
    grid_gap_x_mm: float = 4.0
    grid_gap_y_mm: float = 4.0
    padding_mm: float = 4.0
    draw_grid_lines: bool = True
    header_size: float = 9.0
    index_size: float = 26.0
    level_size: float = 11.0
    row_size: float = 7.5
    max_indicator_rows: int = 5


def load_scorecard_layout(path: Optional[Path] = SCORECARD_LAYOUT_JSON) -> ScorecardLayout:
    if not path or (not path.exists()):
        return ScorecardLayout()
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except Exception:
        return ScorecardLayout()
    if not isinstance(raw, dict):
        return ScorecardLayout()

    base = asdict(ScorecardLayout())
    merged = {**base, **{k: v for k, v in raw.items() if k in base}}
    try:
        return ScorecardLayout(**merged)
    except Exception:
        return ScorecardLayout()


@dataclass(frozen=True)
class Scorecard:
    pathway: str
    milestone: int
    ambition: str
    goal: GoalProgress
    indicator_scores: Tuple[Tuple[str, float], ...]


def scorecards_from_reports(reports: Iterable[ProgressReport]) -> List[Scorecard]:
    cards: List[Scorecard] = []
    for report in reports:
        for goal in report.goals:
            scores = tuple((name, report.indicator(name).mean) for name in goal.indicators)
            cards.append(Scorecard(report.pathway, report.milestone, report.ambition, goal, scores))
    return cards


def _fmt_pct(x: float) -> str:
    return f"{x:.0f}%"


def _clip_text_to_width(text: str, font_name: str, font_size: float, max_width: float) -> str:
    if pdfmetrics.stringWidth(text, font_name, font_size) <= max_width:
        return text
    while text and pdfmetrics.stringWidth(text + "...", font_name, font_size) > max_width:
        text = text[:-1]
    return text + "..."


def _draw_centered_text(c: canvas.Canvas, text: str, font_name: str, font_size: float, center_x: float, y: float) -> None:
    if not text:
        return
    c.setFont(font_name, font_size)
    text_w = pdfmetrics.stringWidth(text, font_name, font_size)
    c.drawString(center_x - (text_w / 2.0), y, text)


def _draw_share_bar(c: canvas.Canvas, box: Rect, shares: Dict[ProgressLevel, float]) -> None:
    c.saveState()
    x = box.x
    for level in ProgressLevel:
        w = box.w * float(shares[level])
        if w <= 0:
            continue
        c.setFillColor(LEVEL_COLORS[level])
        c.rect(x, box.y, w, box.h, stroke=0, fill=1)
        if w > 9 * mm:
            c.setFillColor(colors.white)
            _draw_centered_text(c, _fmt_pct(100 * float(shares[level])), FONT_BOLD, 6.5, x + w / 2.0, box.y + box.h / 2.0 - 2.2)
        x += w
    c.setStrokeColor(colors.Color(0.5, 0.5, 0.5))
    c.setLineWidth(0.4)
    c.rect(box.x, box.y, box.w, box.h, stroke=1, fill=0)
    c.restoreState()


def _draw_scorecard(c: canvas.Canvas, card: Scorecard, box: Rect, layout: ScorecardLayout) -> None:
    inner = box.inset(layout.padding_mm * mm, layout.padding_mm * mm)
    goal = card.goal

    # header band in the modal level color
    band_h = 7.0 * mm
    c.saveState()
    c.setFillColor(LEVEL_COLORS[goal.level])
    c.rect(box.x, box.top - band_h, box.w, band_h, stroke=0, fill=1)
    c.setFillColor(colors.white)
    header = f"{goal.goal}  |  {card.pathway}  |  {card.milestone}  |  {card.ambition}"
    c.setFont(FONT_BOLD, layout.header_size)
    c.drawString(inner.x, box.top - band_h + 2.3 * mm, _clip_text_to_width(header, FONT_BOLD, layout.header_size, inner.w))
    c.restoreState()

    y = box.top - band_h - layout.index_size - 2.0 * mm
    c.setFillColor(colors.Color(0.10, 0.10, 0.10))
    _draw_centered_text(c, _fmt_pct(goal.mean), FONT_BOLD, layout.index_size, box.center_x, y)
    y -= layout.level_size + 2.0 * mm
    _draw_centered_text(c, f"Most likely: {goal.level.label}", FONT_REGULAR, layout.level_size, box.center_x, y)

    y -= 9.0 * mm
    _draw_share_bar(c, Rect(inner.x, y, inner.w, 5.5 * mm), goal.shares)

    y -= 5.0 * mm
    c.setFont(FONT_REGULAR, layout.row_size)
    rows = card.indicator_scores[: layout.max_indicator_rows]
    for name, score in rows:
        label = _clip_text_to_width(name, FONT_REGULAR, layout.row_size, inner.w - 16 * mm)
        c.drawString(inner.x, y, label)
        value = _fmt_pct(score)
        c.drawString(inner.x + inner.w - pdfmetrics.stringWidth(value, FONT_REGULAR, layout.row_size), y, value)
        y -= layout.row_size * 1.35
    hidden = len(card.indicator_scores) - len(rows)
    if hidden > 0:
        c.drawString(inner.x, y, f"+{hidden} more")


def generate_scorecards_pdf(
    reports: Sequence[ProgressReport],
    out_pdf_path: Union[str, Path],
    title: str = "SDG goal scorecards",
    layout: Optional[ScorecardLayout] = None,
) -> Path:
    """
    Generate an A4 PDF, `cols` x `rows` cards per page, one card per goal and report.
    """
    out_pdf_path = Path(out_pdf_path)
    out_pdf_path.parent.mkdir(parents=True, exist_ok=True)
    layout = layout or ScorecardLayout()

    page_w, page_h = A4
    c = canvas.Canvas(str(out_pdf_path), pagesize=A4)
    c.setTitle(title)

    cols, rows = layout.cols, layout.rows
    card_w = layout.card_w_mm * mm
    card_h = layout.card_h_mm * mm
    gap_x = layout.grid_gap_x_mm * mm
    gap_y = layout.grid_gap_y_mm * mm
    grid_w = (card_w * cols) + (gap_x * max(0, cols - 1))
    grid_h = (card_h * rows) + (gap_y * max(0, rows - 1))
    grid_x = (page_w - grid_w) / 2.0
    grid_y = (page_h - grid_h) / 2.0

    cards = scorecards_from_reports(reports)
    idx = 0
    while idx < len(cards) or idx == 0:
        for r in range(rows):
            for col in range(cols):
                if idx >= len(cards):
                    break
                # card origin (bottom-left)
                box = Rect(grid_x + col * (card_w + gap_x), grid_y + (rows - 1 - r) * (card_h + gap_y), card_w, card_h)
                if layout.draw_grid_lines:
                    c.setStrokeColor(colors.Color(0.85, 0.85, 0.85))
                    c.setLineWidth(0.6)
                    c.rect(box.x, box.y, box.w, box.h, stroke=1, fill=0)
                _draw_scorecard(c, cards[idx], box, layout)
                idx += 1
        c.showPage()
        if not cards:
            break

    c.save()
    return out_pdf_path
