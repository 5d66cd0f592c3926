"""Regenerate the scripted scenarios under scenarios/.

Task files are written from the dicts below; scripted replies are derived by
driving the simulator, so grounded tags always match what the agent will see.

    python scripts/make_scenarios.py
"""
from __future__ import annotations

import json
from pathlib import Path

from deskagent.aci import Click, compile_action, parse_action
from deskagent.env import SimDesktop, parse_task
from deskagent import prompts as P

ROOT = Path(__file__).resolve().parents[1] / "scenarios"
EMAIL = "anonym-x2024@outlook.com"
REMOVE_QUERY = "How to remove an email account in Thunderbird"


def node(key, role, name, bbox, children=(), **kw):
    d = {"key": key, "role": role, "name": name, "bbox": list(bbox)}
    if children:
        d["children"] = list(children)
    d.update(kw)
    return d


def thunderbird_app():
    return {
        "tree": [node("win", "window", "Mozilla Thunderbird", (0, 0, 1280, 800), [
            node("menubar", "menu-bar", "", (0, 0, 1280, 30), [
                node("menu_settings", "menu-item", "Account Settings", (10, 4, 130, 22), on_click=[{"op": "show", "key": "settings"}]),
                node("menu_addr", "menu-item", "Address Book", (150, 4, 110, 22), on_click=[{"op": "show", "key": "addr_book"}]),
            ]),
            node("folders", "tree", "Folders", (0, 30, 260, 770), [
                node("acct_item", "tree-item", EMAIL, (10, 40, 240, 24)),
                node("local_item", "tree-item", "Local Folders", (10, 70, 240, 24)),
            ]),
            node("addr_book", "window", "Address Book", (300, 60, 600, 400), hidden=True),
            node("settings", "dialog", "Account Settings", (300, 100, 700, 500), [
                node("acct_entry", "list-item", EMAIL, (310, 140, 220, 24)),
                node("remove_btn", "button", "Remove Account", (310, 560, 140, 28), on_click=[{"op": "show", "key": "confirm"}]),
                node("close_btn", "button", "Close", (880, 560, 100, 28), on_click=[{"op": "hide", "key": "settings"}]),
                node("confirm", "dialog", "Remove Account and Data", (450, 250, 400, 200), [
                    node("confirm_label", "label", f"Remove {EMAIL}?", (470, 280, 360, 24)),
                    node("confirm_remove", "button", "Remove", (720, 400, 100, 28), on_click=[
                        {"op": "remove", "key": "acct_item"},
                        {"op": "remove", "key": "acct_entry"},
                        {"op": "hide", "key": "confirm"},
                    ]),
                    node("confirm_cancel", "button", "Cancel", (600, 400, 100, 28), on_click=[{"op": "hide", "key": "confirm"}]),
                ], hidden=True),
            ], hidden=True),
        ])],
        "ocr": [
            {"text": "Inbox", "bbox": [300, 40, 60, 20]},
            {"text": "Account Settings", "bbox": [10, 4, 130, 22]},
        ],
    }


def writer_app():
    return {
        "tree": [node("win", "window", "Untitled 1 - LibreOffice Writer", (0, 0, 1280, 800), [
            node("menubar", "menu-bar", "", (0, 0, 1280, 30), [
                node("menu_view", "menu", "View", (60, 4, 50, 22)),
                node("menu_tools", "menu", "Tools", (120, 4, 50, 22), on_click=[{"op": "show", "key": "tools_menu"}]),
            ]),
            node("tools_menu", "menu-list", "Tools", (120, 30, 200, 120), [
                node("item_options", "menu-item", "Options...", (120, 110, 200, 24), on_click=[
                    {"op": "hide", "key": "tools_menu"}, {"op": "show", "key": "options"}]),
            ], hidden=True),
            node("options", "dialog", "Options - Load/Save - General", (200, 80, 800, 560), [
                node("cat_loadsave", "tree-item", "Load/Save", (210, 200, 160, 22), on_click=[{"op": "show", "key": "general"}]),
                node("general", "panel", "General", (400, 100, 580, 480), [
                    node("autorecover", "check-box", "Save AutoRecovery information every", (420, 140, 300, 22), states=["checked"]),
                    node("minutes", "text-field", "Minutes", (730, 140, 60, 22), value="10"),
                ], hidden=True),
                node("ok_btn", "button", "OK", (880, 600, 100, 28), on_click=[{"op": "hide", "key": "options"}]),
            ], hidden=True),
        ])],
    }


def terminal_apps():
    return {
        "files": {"tree": [node("files_win", "window", "Home - Files", (0, 0, 1280, 800), [
            node("sidebar", "list", "Places", (0, 40, 200, 760)),
        ])]},
        "terminal": {
            "tree": [node("term_win", "window", "Terminal", (100, 100, 900, 600), [
                node("prompt", "label", "user@host:/$", (110, 110, 200, 20)),
                node("term", "terminal", "Terminal input", (110, 140, 880, 540), on_enter=[
                    {"op": "set_name", "key": "prompt", "name": "user@host:~$"}]),
            ])],
            "focus": "term",
        },
    }


def task_doc(task_id, instruction, apps, focused, evaluator, script, **extra):
    doc = {"schema_version": 1, "id": task_id, "instruction": instruction, "focused_app": focused,
           "apps": apps, "evaluator": evaluator, "script": script}
    doc.update(extra)
    return doc


def act(status, analysis, semantic, grounded):
    return (f"STATUS CHECK: {status}\nOBSERVATION ANALYSIS: {analysis}\n"
            f"SEMANTIC ACTION: {semantic}\nGROUNDED ACTION: {grounded}")


def rule(match, reply, repeat=False):
    d = {"match": match, "reply": reply}
    if repeat:
        d["repeat"] = True
    return d


def plan_text(items):
    return "\n".join(f"{i}. TITLE: {t} CONTEXT: {c}" for i, (t, c) in enumerate(items, 1))


class Driver:
    """Steps a simulator alongside script writing to resolve keys to tags."""

    def __init__(self, doc):
        self.env = SimDesktop()
        self.obs = self.env.reset(parse_task(doc))

    def tag(self, key):
        for tag, n in self.env.tag_map.items():
            if n.key == key:
                return tag
        raise KeyError(key)

    def do(self, literal):
        action = parse_action(literal)
        self.obs = self.env.step(compile_action(action, self.obs)).observation
        return literal


def write(path: Path, doc=None, rules=None):
    path.parent.mkdir(parents=True, exist_ok=True)
    if doc is not None:
        path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    if rules is not None:
        path.write_text("".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rules), encoding="utf-8")


def removal_rules(d: Driver, with_reflection=False):
    """Query, fusion, plan, 3 clicks in 2 subtasks, summaries."""
    return [
        rule(P.QUERY, REMOVE_QUERY),
        rule(P.FUSION, "Open Account Settings from the menu, choose Remove Account and confirm the removal dialog."),
        rule(P.PLAN, plan_text([
            ("Open Account Settings", "Click the Account Settings entry in the menu bar."),
            ("Remove the Account", f"In the Account Settings dialog click Remove Account for {EMAIL}, then confirm with Remove."),
        ])),
        rule(P.ACTION, act("Task just started.", "The menu bar has an Account Settings entry.",
                           "Click Account Settings.", d.do(f"agent.click({d.tag('menu_settings')}, 1, \"left\")"))),
        rule(P.ACTION, act("The Account Settings dialog opened.", "Dialog is visible.", "Subtask complete.", "agent.done()")),
        rule(P.EPISODE_SUMMARY, "Open Account Settings by clicking the Account Settings menu entry: agent.click(<Account Settings>, 1, \"left\")."),
        rule(P.ACTION, act("Dialog open.", f"A Remove Account button is shown for {EMAIL}.",
                           "Click Remove Account.", d.do(f"agent.click({d.tag('remove_btn')}, 1, \"left\")"))),
        rule(P.ACTION, act("A confirmation dialog appeared.", "It offers Remove and Cancel.",
                           "Confirm with Remove.", d.do(f"agent.click({d.tag('confirm_remove')}, 1, \"left\")"))),
        rule(P.ACTION, act("The account disappeared from the folder tree.", "Only Local Folders remains.",
                           "Subtask complete.", "agent.done()")),
        rule(P.EPISODE_SUMMARY, "In Account Settings click Remove Account, then click Remove in the confirmation dialog."),
        rule(P.TASK_SUMMARY, "Removed the account by opening Account Settings from the menu bar, pressing Remove Account and confirming. Worked first time."),
    ]


def thunderbird(directory: Path, task_id="thunderbird-remove-account"):
    doc = task_doc(task_id, f'Help me to remove the account "{EMAIL}"', {"thunderbird": thunderbird_app()}, "thunderbird", [
        {"rule": "element-absent", "app": "thunderbird", "role": "tree-item", "name": EMAIL},
        {"rule": "element-exists", "app": "thunderbird", "key": "local_item"},
    ], "remove_account.script.jsonl")
    write(directory / "remove_account.task.json", doc)
    write(directory / "remove_account.script.jsonl", rules=removal_rules(Driver(doc)))
    return doc


def autosave(directory: Path):
    doc = task_doc("writer-autosave-3min", "Make LibreOffice Writer save AutoRecovery information every 3 minutes",
                   {"writer": writer_app()}, "writer",
                   [{"rule": "attribute-equals", "app": "writer", "key": "minutes", "attribute": "value", "equals": "3"}],
                   "autosave.script.jsonl")
    d = Driver(doc)
    rules = [
        rule(P.QUERY, "How to change the AutoRecovery save interval in LibreOffice Writer"),
        rule(P.FUSION, "The AutoRecovery interval lives under Tools > Options > Load/Save > General."),
        rule(P.PLAN, plan_text([
            ("Open Options from the View menu", "Look for an Options entry under View."),
            ("Set the AutoRecovery interval", "Type 3 into the minutes field."),
        ])),
        rule(P.ACTION, act("Task just started.", "The View menu has no Options entry in this version.",
                           "This subtask cannot be done from the View menu; give up on it.", "agent.fail()")),
        # replan
        rule(P.QUERY, "How to open Tools Options in LibreOffice Writer"),
        rule(P.FUSION, "Use Tools > Options, then Load/Save > General."),
        rule(P.PLAN, plan_text([
            ("Open Tools Options", "Click Tools, then Options..."),
            ("Set the AutoRecovery interval", "Select Load/Save, then overwrite the minutes field with 3."),
        ])),
        rule(P.ACTION, act("Replanned.", "Tools menu is in the menu bar.", "Open Tools.",
                           d.do(f"agent.click({d.tag('menu_tools')}, 1, \"left\")"))),
        rule(P.ACTION, act("Tools menu opened.", "Options... is listed.", "Open Options.",
                           d.do(f"agent.click({d.tag('item_options')}, 1, \"left\")"))),
        rule(P.ACTION, act("Options dialog open.", "Categories are listed.", "Subtask complete.", "agent.done()")),
        rule(P.EPISODE_SUMMARY, "Click Tools in the menu bar, then Options... to open the Options dialog."),
        rule(P.ACTION, act("Dialog open.", "Load/Save category visible.", "Open Load/Save.",
                           d.do(f"agent.click({d.tag('cat_loadsave')}, 1, \"left\")"))),
        rule(P.ACTION, act("General page shown.", "Minutes field holds 10.", "Replace the minutes with 3.",
                           d.do(f"agent.type({d.tag('minutes')}, \"3\", overwrite=True)"))),
        rule(P.ACTION, act("Minutes now 3.", "Value updated.", "Subtask complete.", "agent.done()")),
        rule(P.EPISODE_SUMMARY, "In Options select Load/Save, then type 3 into the AutoRecovery minutes field with overwrite."),
        rule(P.TASK_SUMMARY, "The View menu had no Options entry; after replanning, Tools > Options > Load/Save > General let the interval be set to 3 minutes."),
    ]
    write(directory / "autosave.task.json", doc)
    write(directory / "autosave.script.jsonl", rules=rules)


def stuck(directory: Path):
    """A worker that never finishes: every subtask hits the step limit."""
    doc = task_doc("stuck-waiting", f'Help me to remove the account "{EMAIL}"', {"thunderbird": thunderbird_app()}, "thunderbird",
                   [{"rule": "element-absent", "app": "thunderbird", "key": "acct_item"}], "stuck.script.jsonl")
    rules = [
        rule(P.QUERY, REMOVE_QUERY, repeat=True),
        rule(P.FUSION, "Account removal is under Account Settings.", repeat=True),
        rule(P.PLAN, plan_text([("Wait for Thunderbird to load", "Wait until the account list appears.")]), repeat=True),
        rule(P.REFLECTION, "You keep waiting without progress; try clicking Account Settings instead.", repeat=True),
        rule(P.ACTION, act("Nothing changed.", "Still loading, apparently.", "Wait a second.", "agent.wait(1)"), repeat=True),
        rule(P.TASK_SUMMARY, "The agent kept waiting for the window to load and never opened Account Settings; the step limit ended the task.", repeat=True),
    ]
    write(directory / "stuck.task.json", doc)
    write(directory / "stuck.script.jsonl", rules=rules)


def suite(directory: Path):
    thunderbird(directory)

    doc = task_doc("terminal-cd-home", "Open the terminal and change into /home/user", terminal_apps(), "files",
                   [{"rule": "attribute-equals", "app": "terminal", "key": "term", "attribute": "value", "equals": "cd /home/user"}],
                   "terminal_cd.script.jsonl")
    d = Driver(doc)
    rules = [
        rule(P.QUERY, "How to change directory in an Ubuntu terminal"),
        rule(P.FUSION, "Switch to the terminal and run cd with the target path."),
        rule(P.PLAN, plan_text([("Navigate to Home Directory", "Switch to the terminal and type cd /home/user, then press Enter.")])),
        rule(P.ACTION, act("Task just started.", "Files is in front; a terminal is open.", "Switch to the terminal.",
                           d.do("agent.switch_applications(\"terminal\")"))),
        rule(P.ACTION, act("Terminal in front.", "The input has focus.", "Type the cd command.",
                           d.do("agent.type(text='cd /home/user', enter=True)"))),
        rule(P.ACTION, act("Prompt now shows ~.", "Directory changed.", "Subtask complete.", "agent.done()")),
        rule(P.EPISODE_SUMMARY, "Switch to the terminal, then agent.type(text='cd /home/user', enter=True)."),
        rule(P.TASK_SUMMARY, "Switched to the terminal and changed into the home directory."),
    ]
    write(directory / "terminal_cd.task.json", doc)
    write(directory / "terminal_cd.script.jsonl", rules=rules)

    doc = task_doc("thunderbird-copy-address", f"Copy the address {EMAIL} so it can be pasted later",
                   {"thunderbird": thunderbird_app()}, "thunderbird",
                   [{"rule": "buffer-equals", "value": EMAIL}], "copy_address.script.jsonl")
    rules = [
        rule(P.QUERY, "How to copy an email account address in Thunderbird"),
        rule(P.FUSION, "Read the address from the folder pane."),
        rule(P.PLAN, plan_text([("Save the address", "Store the account address shown in the folder pane.")])),
        rule(P.ACTION, act("Task just started.", f"The folder pane lists {EMAIL}.", "Save the address.",
                           f"agent.save_to_buffer(\"{EMAIL}\")")),
        rule(P.ACTION, act("Saved.", "Buffer holds the address.", "Subtask complete.", "agent.done()")),
        rule(P.EPISODE_SUMMARY, "Read the address in the folder pane and save_to_buffer it."),
        rule(P.TASK_SUMMARY, "Saved the account address into the buffer."),
    ]
    write(directory / "copy_address.task.json", doc)
    write(directory / "copy_address.script.jsonl", rules=rules)

    doc = task_doc("thunderbird-open-address-book", "Open the Thunderbird address book", {"thunderbird": thunderbird_app()}, "thunderbird",
                   [{"rule": "element-exists", "app": "thunderbird", "key": "addr_book"}], "wrong_done.script.jsonl")
    d = Driver(doc)
    rules = [
        rule(P.QUERY, "How to open the address book in Thunderbird"),
        rule(P.FUSION, "The address book is in the menu bar."),
        rule(P.PLAN, plan_text([("Open the Address Book", "Click Address Book in the menu bar.")])),
        rule(P.ACTION, act("Task just started.", "Menu bar visible.", "Click the address book entry.",
                           d.do(f"agent.click({d.tag('menu_settings')}, 1, \"left\")"))),
        rule(P.ACTION, act("A window opened.", "Looks right.", "Subtask complete.", "agent.done()")),
        rule(P.EPISODE_SUMMARY, "Clicked the menu entry for the address book."),
        rule(P.TASK_SUMMARY, "Clicked a menu entry believed to be the address book."),
    ]
    write(directory / "wrong_done.task.json", doc)
    write(directory / "wrong_done.script.jsonl", rules=rules)


def exploration(directory: Path):
    """Two generated practice tasks on the Thunderbird desktop, one shared script."""
    doc = task_doc("thunderbird-base", "Explore Thunderbird", {"thunderbird": thunderbird_app()}, "thunderbird", [], None)
    del doc["script"]
    write(directory / "base.task.json", doc)
    d = Driver(doc)
    rules = [rule(P.TASK_GENERATION, f"1. Remove the account {EMAIL}\n2. Open the Address Book")]
    rules += removal_rules(d)
    d = Driver(doc)
    rules += [
        rule(P.QUERY, "How to open the address book in Thunderbird"),
        rule(P.FUSION, "The address book is in the menu bar."),
        rule(P.PLAN, plan_text([("Open the Address Book", "Click Address Book in the menu bar.")])),
        rule(P.ACTION, act("Task just started.", "Menu bar visible.", "Click Address Book.",
                           d.do(f"agent.click({d.tag('menu_addr')}, 1, \"left\")"))),
        rule(P.ACTION, act("Address Book opened.", "Window visible.", "Subtask complete.", "agent.done()")),
        rule(P.EPISODE_SUMMARY, "Click Address Book in the menu bar."),
        rule(P.TASK_SUMMARY, "Opened the address book from the menu bar."),
    ]
    write(directory / "explore.script.jsonl", rules=rules)
    (directory / "search").mkdir(exist_ok=True)
    (directory / "search" / "default.txt").write_text(
        "Thunderbird keeps account options under Account Settings; accounts are removed with Account Actions > Remove Account.\n",
        encoding="utf-8")


def main():
    thunderbird(ROOT / "thunderbird")
    autosave(ROOT / "autosave")
    stuck(ROOT / "stuck")
    suite(ROOT / "suite")
    exploration(ROOT / "explore")
    print(f"scenarios written under {ROOT}")


if __name__ == "__main__":
    main()
