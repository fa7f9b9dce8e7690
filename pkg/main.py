import typer

from commands import ablate, evaluate, pool, synth, train

app = typer.Typer(
    name="triagekit",
    help="Applicant triage: synthetic data, admit-probability model, pools and evaluation reports",
    no_args_is_help=True,
    add_completion=False,
    pretty_exceptions_enable=False,
)

# Register commands
app.command("synth")(synth.synth)
app.command("train")(train.train)
app.command("pool")(pool.pool)
app.command("evaluate")(evaluate.evaluate)
app.command("ablate")(ablate.ablate)


if __name__ == "__main__":
    app()
