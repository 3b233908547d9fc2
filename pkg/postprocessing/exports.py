"""Report writers: JSON result, CSV plot data and an optional Excel workbook.

All CSVs are UTF-8 with a header row. Rendering is left to external tools.
"""
import csv
import json
import logging
import math

import numpy as np

log = logging.getLogger(__name__)


def _clean(obj):
    """JSON-safe copy: numpy scalars -> Python, NaN/inf -> None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def write_json(data, path):
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(_clean(data), f, indent=2, allow_nan=False)
        f.write('\n')
    log.info("wrote %s", path)


def _write_rows(path, header, rows):
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)
    log.info("wrote %s", path)


def _fmt(x):
    return '' if x is None or (isinstance(x, float) and math.isnan(x)) else repr(float(x))


def write_embedding_csv(report, ds, path):
    """One row per sample per completed fold: coordinates, labels, role."""
    ell_max = max(f.coords.shape[1] for f in report.completed)
    header = (['fold', 'row_id'] + [f'u{j + 1}' for j in range(ell_max)]
              + ['true_label', 'predicted_label', 'role'])
    rows = []
    for f in report.completed:
        ids = np.concatenate([f.train_index, f.test_index])
        n_train = len(f.train_index)
        for i, row_id in enumerate(ids):
            coords = [_fmt(x) for x in f.coords[i]]
            coords += [''] * (ell_max - len(coords))
            true = ds.label_names[ds.labels[row_id] - 1]
            if i < n_train:
                pred, role = '', 'train'
            else:
                pred, role = ds.label_names[f.predicted[i - n_train] - 1], 'test'
            rows.append([f.fold, int(row_id)] + coords + [true, pred, role])
    _write_rows(path, header, rows)


def write_scaling_csv(report, feature_names, path):
    """|integrated factor| per feature, per fold and averaged over folds."""
    folds = [f for f in report.completed if f.scaling and f.scaling.get('scaling')]
    factors = np.array([np.abs(f.scaling['scaling']['integrated']) for f in folds])
    header = (['feature', 'name'] + [f'fold_{f.fold}' for f in folds] + ['mean'])
    rows = []
    for j, name in enumerate(feature_names):
        col = factors[:, j] if len(folds) else np.array([])
        rows.append([j + 1, name] + [_fmt(x) for x in col]
                    + [_fmt(col.mean()) if col.size else ''])
    _write_rows(path, header, rows)


def write_variance_sweep_csv(sweep, path):
    """sweep: list of (variance, report) pairs."""
    rows = []
    for variance, report in sweep:
        rows.append([_fmt(variance)] + [_fmt(report.summary(m)[0])
                                        for m in ('oa', 'aa', 'nmi')])
    _write_rows(path, ['variance', 'oa_mean', 'aa_mean', 'nmi_mean'], rows)


def write_knn_sweep_csv(report, path):
    rows = [[k, _fmt(mean), _fmt(std)]
            for k, (mean, std) in report.knn_sweep_summary().items()]
    _write_rows(path, ['k', 'oa_mean', 'oa_std'], rows)


# --------------------------------------------------------- Excel helpers

def make_report_styles():
    """Return a dict of openpyxl style objects for the report sheets."""
    from openpyxl.styles import Alignment, Border, Font, PatternFill, Side

    return {
        'dark_fill': PatternFill("solid", fgColor="1F4E79"),
        'mid_fill': PatternFill("solid", fgColor="2E75B6"),
        'white_bold': Font(bold=True, color="FFFFFF", size=11),
        'sub_font': Font(bold=True, color="FFFFFF", size=10),
        'center': Alignment(horizontal="center", vertical="center"),
        'cell_border': Border(bottom=Side(style='thin', color="B4C6E7")),
        'bold_font': Font(bold=True),
        'num2': '0.00',
    }


def _write_table(ws, title, header, rows, styles, bold_rows=()):
    """Title bar in row 2, headers in row 3, data from row 4; content at B2."""
    from openpyxl.utils import get_column_letter

    s = styles
    c0 = 1
    ncols = len(header)
    cell = ws.cell(row=2, column=1 + c0, value=title)
    cell.font = s['white_bold']
    cell.fill = s['dark_fill']
    cell.alignment = s['center']
    ws.merge_cells(start_row=2, start_column=1 + c0, end_row=2, end_column=ncols + c0)
    for ci in range(2 + c0, ncols + 1 + c0):
        ws.cell(row=2, column=ci).fill = s['dark_fill']

    for ci, h in enumerate(header, 1 + c0):
        cell = ws.cell(row=3, column=ci, value=h)
        cell.font = s['sub_font']
        cell.fill = s['mid_fill']
        cell.alignment = s['center']

    for i, values in enumerate(rows):
        row = 4 + i
        for ci, v in enumerate(values, 1 + c0):
            if isinstance(v, float) and math.isnan(v):
                v = None
            cell = ws.cell(row=row, column=ci, value=v)
            cell.alignment = s['center']
            cell.border = s['cell_border']
            if isinstance(v, float):
                cell.number_format = s['num2']
            if i in bold_rows:
                cell.font = s['bold_font']

    ws.column_dimensions['A'].width = 2
    for ci in range(1 + c0, ncols + 1 + c0):
        ws.column_dimensions[get_column_letter(ci)].width = 14
    ws.freeze_panes = 'B4'
    ws.sheet_view.showGridLines = False


def export_to_excel(report, xlsx_path, feature_names=None, title=None):
    """Summary, per-fold and scaling-factor sheets. Aborted folds are bold."""
    try:
        from openpyxl import Workbook
    except ImportError:
        raise ImportError("openpyxl is required for Excel export. "
                          "Install with: pip install openpyxl") from None

    styles = make_report_styles()
    wb = Workbook()
    ws = wb.active
    ws.title = "Summary"
    rows = []
    for metric in ('oa', 'aa', 'nmi'):
        mean, std = report.summary(metric)
        rows.append([metric.upper(), mean, std])
    rows.append(['completed folds', len(report.completed), None])
    rows.append(['aborted folds', len(report.aborted), None])
    _write_table(ws, title or "Cross-validated performance (%)",
                 ['Metric', 'Mean', 'Std'], rows, styles)

    ws = wb.create_sheet("Folds")
    K = max((len(f.per_class) for f in report.folds), default=0)
    rows, bold = [], []
    for i, f in enumerate(report.folds):
        per_class = list(f.per_class) + [None] * (K - len(f.per_class))
        rows.append([f.fold, f.status, f.oa, f.aa, f.nmi] + per_class
                    + [f.ell, ', '.join(str(p + 1) for p in f.flips), f.seconds,
                       f.diagnostic])
        if f.status != 'complete':
            bold.append(i)
    _write_table(ws, "Per-fold results",
                 ['Fold', 'Status', 'OA', 'AA', 'NMI']
                 + [f'Class {c} acc.' for c in range(1, K + 1)]
                 + ['ell', 'Flipped splits', 'Seconds', 'Diagnostic'],
                 rows, styles, bold_rows=bold)

    folds = [f for f in report.completed if f.scaling and f.scaling.get('scaling')]
    if folds:
        ws = wb.create_sheet("Scaling")
        m = len(folds[0].scaling['scaling']['integrated'])
        names = feature_names or [f"f{j + 1}" for j in range(m)]
        rows = [[j + 1, names[j]]
                + [abs(float(f.scaling['scaling']['integrated'][j])) for f in folds]
                for j in range(m)]
        _write_table(ws, "Integrated scaling factors |s^(1/2)|",
                     ['Feature', 'Name'] + [f'Fold {f.fold}' for f in folds],
                     rows, styles)

    wb.save(xlsx_path)
    print(f"Excel workbook saved to: {xlsx_path}")
