from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional, Union

from reportlab.lib import colors
from reportlab.lib.enums import TA_CENTER
from reportlab.lib.pagesizes import A4
from reportlab.lib.styles import ParagraphStyle, getSampleStyleSheet
from reportlab.lib.units import inch
from reportlab.platypus import Paragraph, SimpleDocTemplate, Spacer, Table, TableStyle

from . import __version__
from .kinematics import DOF_NAMES
from .logger import logger

ACCENT = colors.HexColor('#1e40af')


def _dof_label(number: int) -> str:
    index = number - 1
    name = DOF_NAMES[index] if 0 <= index < len(DOF_NAMES) else ""
    return f"q{number} {name.replace('_', ' ')}".strip()


class MetricsReportGenerator:
    """PDF rendering of a metrics report and its run manifest"""

    def __init__(self, title: str = "Range of Motion Report"):
        self.title = title

    def create_header(self, styles) -> List:
        story = []
        title_style = ParagraphStyle(
            'ReportTitle',
            parent=styles['Title'],
            fontSize=22,
            textColor=ACCENT,
            spaceAfter=8,
            alignment=TA_CENTER,
            fontName='Helvetica-Bold'
        )
        subtitle_style = ParagraphStyle(
            'Subtitle',
            parent=styles['Normal'],
            fontSize=11,
            textColor=colors.grey,
            spaceAfter=16,
            alignment=TA_CENTER
        )
        story.append(Paragraph(self.title, title_style))
        story.append(Paragraph("Pairwise boundary areas and impairment index", subtitle_style))
        story.append(Spacer(1, 0.2 * inch))
        return story

    def _section_header(self, text: str, styles) -> Paragraph:
        style = ParagraphStyle('SectionHeader', parent=styles['Heading2'], fontSize=13,
                               textColor=ACCENT, spaceAfter=8)
        return Paragraph(text, style)

    def create_pair_table(self, report: Dict) -> Table:
        weights = {(i, j): c for i, j, c in report.get("weights", [])}
        rows = [["DoF pair", "Area (deg²)", "Uncertainty", "Weight"]]
        for pair in report.get("pairs", []):
            i, j = pair["i"], pair["j"]
            weight = weights.get((min(i, j), max(i, j)), 0.0)
            rows.append([
                f"{_dof_label(i)} / {_dof_label(j)}",
                f"{pair['area']:.1f}",
                f"± {pair['uncertainty']:.1f}",
                f"{weight:g}",
            ])

        table = Table(rows, colWidths=[3.4 * inch, 1.1 * inch, 1.1 * inch, 0.7 * inch])
        table.setStyle(TableStyle([
            ('BACKGROUND', (0, 0), (-1, 0), colors.HexColor('#e5e7eb')),
            ('FONTNAME', (0, 0), (-1, 0), 'Helvetica-Bold'),
            ('FONTNAME', (0, 1), (-1, -1), 'Helvetica'),
            ('FONTSIZE', (0, 0), (-1, -1), 9),
            ('ALIGN', (1, 0), (-1, -1), 'RIGHT'),
            ('BOTTOMPADDING', (0, 0), (-1, -1), 6),
            ('TOPPADDING', (0, 0), (-1, -1), 6),
            ('GRID', (0, 0), (-1, -1), 1, colors.HexColor('#d1d5db')),
            ('VALIGN', (0, 0), (-1, -1), 'MIDDLE'),
        ]))
        return table

    def create_summary_table(self, report: Dict) -> Optional[Table]:
        rows = []
        if "V" in report:
            rows.append(["Weighted volume V:", f"{report['V']:.1f}"])
        if "II" in report:
            rows.append(["V impaired:", f"{report['V_impaired']:.1f}"])
            rows.append(["V healthy:", f"{report['V_healthy']:.1f}"])
            rows.append(["Impairment Index:", f"{report['II']:.4f}"])
        if not rows:
            return None

        table = Table(rows, colWidths=[2.2 * inch, 4 * inch])
        table.setStyle(TableStyle([
            ('BACKGROUND', (0, 0), (0, -1), colors.HexColor('#e5e7eb')),
            ('FONTNAME', (0, 0), (0, -1), 'Helvetica-Bold'),
            ('FONTSIZE', (0, 0), (-1, -1), 10),
            ('BOTTOMPADDING', (0, 0), (-1, -1), 8),
            ('TOPPADDING', (0, 0), (-1, -1), 8),
            ('GRID', (0, 0), (-1, -1), 1, colors.HexColor('#d1d5db')),
        ]))
        return table

    def create_manifest_section(self, manifest: Dict, styles) -> List:
        story = [Spacer(1, 0.3 * inch), self._section_header("Run Manifest", styles)]
        rows = [
            ["Command:", manifest.get('command', 'N/A')],
            ["Started:", manifest.get('started_at', 'N/A')],
            ["Library version:", manifest.get('library_version', 'N/A')],
        ]
        for path, digest in manifest.get('inputs', {}).items():
            rows.append([f"Input {Path(path).name}:", digest[:32] + "..."])

        signature = manifest.get('_signature')
        if signature:
            rows.append(["Signature:", f"{signature.get('algorithm', 'N/A')}, {signature.get('signed_at', 'N/A')}"])
            rows.append(["Content hash:", signature.get('content_hash', 'N/A')[:32] + "..."])

        table = Table(rows, colWidths=[1.8 * inch, 4.4 * inch])
        table.setStyle(TableStyle([
            ('BACKGROUND', (0, 0), (0, -1), colors.HexColor('#f3f4f6')),
            ('FONTNAME', (0, 0), (0, -1), 'Helvetica-Bold'),
            ('FONTSIZE', (0, 0), (-1, -1), 8),
            ('BOTTOMPADDING', (0, 0), (-1, -1), 5),
            ('TOPPADDING', (0, 0), (-1, -1), 5),
            ('GRID', (0, 0), (-1, -1), 0.5, colors.grey),
        ]))
        story.append(table)
        return story

    def create_footer(self, styles) -> List:
        footer_style = ParagraphStyle('Footer', parent=styles['Normal'], fontSize=8,
                                      textColor=colors.grey, alignment=TA_CENTER)
        text = f"Generated by rom_boundary v{__version__} on {datetime.now().strftime('%Y-%m-%d %H:%M')}"
        return [Spacer(1, 0.3 * inch), Paragraph(text, footer_style)]

    def generate(self, report: Dict, path: Union[str, Path], manifest: Optional[Dict] = None) -> Path:
        path = Path(path)
        doc = SimpleDocTemplate(
            str(path),
            pagesize=A4,
            rightMargin=0.75 * inch,
            leftMargin=0.75 * inch,
            topMargin=0.75 * inch,
            bottomMargin=0.75 * inch
        )
        styles = getSampleStyleSheet()

        story = self.create_header(styles)
        if report.get("pairs"):
            story.append(self._section_header("Pairwise Areas", styles))
            story.append(self.create_pair_table(report))
            story.append(Spacer(1, 0.2 * inch))

        summary = self.create_summary_table(report)
        if summary is not None:
            story.append(self._section_header("Volumes", styles))
            story.append(summary)

        if manifest:
            story.extend(self.create_manifest_section(manifest, styles))
        story.extend(self.create_footer(styles))

        doc.build(story)
        logger.log_artifact_written("PDF report", path)
        return path
