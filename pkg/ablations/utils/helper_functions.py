import numpy as np
import pandas as pd
import plotly.express as px
import plotly.graph_objects as go
import statsmodels.api as sm


def ols_fit(x, y):
    """Intercept and slope of y on x by ordinary least squares"""
    model = sm.OLS(np.asarray(y, dtype=float), sm.add_constant(np.asarray(x, dtype=float))).fit()
    intercept, slope = model.params
    return float(intercept), float(slope)


def plot_loglog(df, x, y, title, color=None):
    fig = px.scatter(
        df,
        x=x,
        y=y,
        color=color,
        title=title,
        log_x=True,
        log_y=True,
        trendline="ols",
        trendline_options=dict(log_x=True, log_y=True),
    )
    return fig


def plot_curves(df, x, y, color, title):
    fig = px.line(df, x=x, y=y, color=color, markers=True, title=title)
    fig.update_xaxes(title=x)
    fig.update_yaxes(title=y)
    return fig


def plot_errors_by_method(df, value, title):
    fig = px.box(df, x="method", y=value, points="all", title=title)
    return fig


def plot_heatmap(matrix, title, zmin=None, zmax=None):
    fig = px.imshow(matrix, title=title, zmin=zmin, zmax=zmax)
    fig.update_xaxes(title="x")
    fig.update_yaxes(title="y")
    return fig


def header_report(name, rows: dict):
    labels = ["Name", *rows]
    values = [name, *(f"{v:.4g}" if isinstance(v, float) else str(v) for v in rows.values())]
    return go.Figure(go.Table(cells={"values": [labels, values]}, columnwidth=[0.3, 0.7]))


def summary_to_csv(run_name, name, rows: dict, path_file):
    pd.DataFrame({"Config": run_name, "Name": name, **rows}, index=[0]).to_csv(
        f"{path_file}.csv", index=False
    )


PAGE = """<html>
<head><script src="https://cdn.plot.ly/plotly-latest.min.js"></script></head>
<body>
{sections}
</body>
</html>
"""


def html_report(body, path_file):
    """Writes the figure fragments, in order, into <path_file>.html"""
    with open(f"{path_file}.html", "w") as f:
        f.write(PAGE.format(sections="\n".join(body)))
