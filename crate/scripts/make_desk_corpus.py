"""Generate a small USPTO-style atom-mapped reaction corpus.

Reactions are produced by forward application of hand-written reaction
templates to building blocks with RDKit. Output rows follow the USPTO-50K
raw csv layout: id,class,reactants>reagents>production. Map number 1 is
placed on a reaction-center atom for roughly 75% of rows, like the original
benchmark, so that shortcut removal has something to remove.

Usage: python3 scripts/make_desk_corpus.py data/desk_corpus.csv
"""
import random
import sys

from rdkit import Chem, RDLogger
from rdkit.Chem import AllChem

RDLogger.DisableLog("rdApp.*")

AMINES = [
    "NCc1ccccc1", "NC1CCCCC1", "C1CCNCC1", "C1COCCN1", "CN", "CCN", "NCCO",
    "Nc1ccccc1", "Nc1ccc(F)cc1", "Nc1ccc(Cl)cc1", "Nc1cccnc1", "CC(C)N",
    "NCc1ccco1", "CN1CCNCC1", "NC1CC1", "Nc1ccc(OC)cc1", "NCC(F)(F)F",
    "NCc1ccc(Br)cc1", "C1CCNC1", "NCCc1ccccc1", "Cc1cc(N)ccc1", "NC(C)c1ccccc1",
    "NC1CCOCC1", "Nc1ncccn1", "NCCN1CCOCC1", "OC(=O)C1CCNCC1", "COC(=O)C1CCNCC1",
]
ACIDS = [
    "OC(=O)c1ccccc1", "CC(=O)O", "OC(=O)c1ccc(F)cc1", "OC(=O)c1ccncc1",
    "OC(=O)C1CC1", "OC(=O)Cc1ccccc1", "OC(=O)c1ccco1", "OC(=O)c1cccs1",
    "CC(C)C(=O)O", "OC(=O)c1ccc(Cl)cc1", "OC(=O)CCl", "OC(=O)c1ccc2ccccc2c1",
    "COc1ccc(C(=O)O)cc1", "OC(=O)C1CCCCC1", "OC(=O)c1cc(Br)ccc1", "OC(=O)CCC(=O)OC",
]
ACID_CHLORIDES = [a.replace("OC(=O)", "ClC(=O)", 1) if a.startswith("OC(=O)") else a.replace("(=O)O", "(=O)Cl") for a in ACIDS]
ALKYL_HALIDES = [
    "BrCc1ccccc1", "ICC", "CI", "BrCC=C", "BrCc1ccc(F)cc1", "ClCc1ccccn1",
    "BrCCOC", "BrCC(=O)OCC", "BrCCCCl", "BrCc1ccc(C#N)cc1", "BrCC1CC1",
    "ICCc1ccccc1", "BrCc1ccc2ccccc2c1", "ClCc1ccc(-c2ccccc2)cc1", "BrCc1cccc(OC)c1",
]
ARYL_HALIDES = [
    "Brc1ccccc1", "Brc1ccc(F)cc1", "Brc1cccnc1", "Ic1ccccc1", "Brc1ccc(C#N)cc1",
    "Brc1ccc(OC)cc1", "Brc1ccc2ccccc2c1", "Brc1cccs1", "Brc1ccc(C(=O)OC)cc1",
    "Brc1cnc2ccccc2c1", "Clc1ncccn1", "Clc1ccc([N+](=O)[O-])cc1", "Brc1ccc(C)cc1",
]
HETARYL_CHLORIDES = ["Clc1ncccn1", "Clc1ccccn1", "Clc1nccs1", "Clc1ccnc(N)n1", "Clc1ncc(F)cn1", "Clc1ccc2ccccc2n1"]
BORONIC = [
    "OB(O)c1ccccc1", "OB(O)c1ccc(F)cc1", "OB(O)c1cccnc1", "OB(O)c1ccco1",
    "CC1(C)OB(c2ccccc2)OC1(C)C", "CC1(C)OB(c2ccc(OC)cc2)OC1(C)C", "OB(O)c1ccc(C)cc1",
    "CC1(C)OB(c2cnn(C)c2)OC1(C)C", "OB(O)c1cccs1",
]
ALCOHOLS = [
    "OCc1ccccc1", "CCO", "OC1CCCCC1", "OCCN1CCOCC1", "OC1CCN(C(=O)OC(C)(C)C)CC1",
    "CC(C)O", "OCCc1ccccc1", "OCC1CC1", "OCc1ccc(Cl)cc1", "CC(O)c1ccccc1",
]
PHENOLS = ["Oc1ccccc1", "Oc1ccc(F)cc1", "Oc1ccc(C=O)cc1", "Oc1cccnc1", "COc1ccc(O)cc1", "Oc1ccc2ccccc2c1"]
ALDEHYDES = ["O=Cc1ccccc1", "O=Cc1ccncc1", "CC=O", "O=Cc1ccc(F)cc1", "O=CC1CCCCC1", "O=Cc1ccco1"]
KETONES = ["CC(=O)c1ccccc1", "O=C1CCCCC1", "CC(=O)C", "O=C1CCN(C(=O)OC(C)(C)C)CC1", "CC(=O)c1ccc(Br)cc1"]
NITRO = ["O=[N+]([O-])c1ccccc1", "O=[N+]([O-])c1ccc(F)cc1", "Cc1ccc([N+](=O)[O-])cc1", "O=[N+]([O-])c1cccnc1", "COC(=O)c1ccc([N+](=O)[O-])cc1"]
SULFONYL_CHLORIDES = ["CS(=O)(=O)Cl", "Cc1ccc(S(=O)(=O)Cl)cc1", "O=S(=O)(Cl)c1ccccc1", "O=S(=O)(Cl)c1cccs1"]
ALKYNES = ["C#Cc1ccccc1", "C#CCO", "C#C[Si](C)(C)C", "C#CC1CC1"]
NITRILES = ["N#Cc1ccccc1", "N#CCc1ccccc1", "N#Cc1ccc(F)cc1"]
ISOCYANATES = ["O=C=Nc1ccccc1", "O=C=NC1CCCCC1", "CC(C)N=C=O"]
GRIGNARD = ["C[Mg]Br", "CC[Mg]Br", "Br[Mg]c1ccccc1"]
EPOXIDES = ["C1CO1", "CC1CO1", "c1ccc(C2CO2)cc1"]
DIOLS = ["OCC(O)CO", "OCC(O)Cc1ccccc1", "CC(O)C(C)O"]
DIAMINES = ["Nc1ccccc1N", "Cc1ccc(N)c(N)c1", "Nc1ccc(F)cc1N"]

BOC2O = "CC(C)(C)OC(=O)OC(=O)OC(C)(C)C"
TBSCL = "CC(C)(C)[Si](C)(C)Cl"
NBS = "O=C1CCC(=O)N1Br"
SOCL2 = "O=S(Cl)Cl"
CBR4 = "BrC(Br)(Br)Br"

# (class, name, smarts, reactant pools, probability weight)
TEMPLATES = [
    (1, "n_alkylation", "[N;!H0;!$(N-C=O);!$(N-S(=O)=O);!$(N-c);!$([N+]):1].[CH2:2][Br,I,Cl]>>[N:1][C:2]", [AMINES, ALKYL_HALIDES], 5),
    (1, "o_alkylation", "[OH:1][c:3].[CH2,CH3:2][Br,I,Cl]>>[O:1]([c:3])[C:2]", [PHENOLS, ALKYL_HALIDES], 3),
    (1, "snar", "[N;!H0;!$(N-C=O);!$(N-c):1].[c:2]([n:3])Cl>>[N:1][c:2][n:3]", [AMINES, HETARYL_CHLORIDES], 3),
    (1, "buchwald", "[N;!H0;!$(N-C=O);!$(N-c):1].[c:2][Br,I]>>[N:1][c:2]", [AMINES, ARYL_HALIDES], 2),
    (1, "reductive_amination", "[N;!H0;!$(N-C=O):1].[CH1:2]=O>>[N:1][CH2:2]", [AMINES, ALDEHYDES], 2),
    (2, "amide_acid", "[N;!H0;!$(N-C=O);!$(N-S);!$([N+]):1].[C:2](=[O:3])[OH]>>[N:1][C:2]=[O:3]", [AMINES, ACIDS], 6),
    (2, "amide_chloride", "[N;!H0;!$(N-C=O);!$(N-S);!$([N+]):1].[C:2](=[O:3])Cl>>[N:1][C:2]=[O:3]", [AMINES, ACID_CHLORIDES], 3),
    (2, "ester", "[OH:1][CX4:4].[C:2](=[O:3])Cl>>[O:1]([C:4])[C:2]=[O:3]", [ALCOHOLS, ACID_CHLORIDES], 2),
    (2, "sulfonamide", "[N;!H0;!$(N-C=O);!$(N-S):1].[S:2](=[O:3])(=[O:4])Cl>>[N:1][S:2](=[O:3])=[O:4]", [AMINES, SULFONYL_CHLORIDES], 3),
    (2, "urea", "[N;!H0;!$(N-C=O);!$(N-S):1].[N:2]=[C:3]=[O:4]>>[N:1][C:3](=[O:4])[N:2]", [AMINES, ISOCYANATES], 1),
    (2, "sulfonate", "[OH:1][CX4:4].[S:2](=[O:3])(=[O:5])Cl>>[O:1]([C:4])[S:2](=[O:3])=[O:5]", [ALCOHOLS, SULFONYL_CHLORIDES], 1),
    (3, "suzuki", "[c:1][Br,I].[c:2]B>>[c:1]-[c:2]", [ARYL_HALIDES, BORONIC], 4),
    (3, "sonogashira", "[c:1][Br,I].[CH:2]#[C:3]>>[c:1][C:2]#[C:3]", [ARYL_HALIDES, ALKYNES], 2),
    (3, "grignard", "[C,c:1][Mg]Br.[C:2]=[O:3]>>[C,c:1][C:2][O:3]", [GRIGNARD, ALDEHYDES + KETONES], 1),
    (4, "benzimidazole", "[NH2:1][c:2][c:3][NH2:4].[C:5](=[O:6])[OH]>>[c:2]1[c:3][n:4][c:5][nH:1]1", [DIAMINES, ACIDS], 1),
    (5, "boc_protection", "[N;!H0;!$(N-C=O);!$(N-c);!$([N+]):1].[CH3:10][C:11]([CH3:12])([CH3:13])[O:14][C:15](=[O:16])OC(=O)OC(C)(C)C>>[N:1][C:15](=[O:16])[O:14][C:11]([CH3:10])([CH3:12])[CH3:13]", [AMINES, [BOC2O]], 2),
    (5, "tbs_protection", "[OH:1][C:2].[CH3:3][C:4]([CH3:5])([CH3:6])[Si:7]([CH3:8])([CH3:9])Cl>>[C:2][O:1][Si:7]([CH3:8])([CH3:9])[C:4]([CH3:3])([CH3:5])[CH3:6]", [ALCOHOLS, [TBSCL]], 1),
    (6, "boc_deprotection", "[N:1]C(=O)OC(C)(C)C>>[N:1]", ["BOC_AMINES"], 4),
    (6, "ester_hydrolysis", "[C:1](=[O:2])[O:3][CH3,CH2]>>[C:1](=[O:2])[O:3]", ["ESTERS"], 3),
    (6, "benzyl_ether_removal", "[O:1][CH2]c1ccccc1>>[O:1]", ["BENZYL_ETHERS"], 1),
    (6, "acetonide_removal", "[O:1]1[C:2][C:3][O:4]C1(C)C>>[O:1][C:2][C:3][O:4]", ["ACETONIDES"], 1),
    (7, "nitro_reduction", "[c:1][N+:2](=O)[O-]>>[c:1][N+0:2]", [NITRO], 3),
    (7, "ketone_reduction", "[C;!$(C-[O,N]):1]=[O:2]>>[C:1][O:2]", [ALDEHYDES + KETONES], 2),
    (7, "nitrile_reduction", "[C:1]#[N:2]>>[CH2:1][N:2]", [NITRILES], 1),
    (7, "acid_reduction", "[C:1](=O)[OH:2]>>[CH2:1][O:2]", [ACIDS], 1),
    (8, "alcohol_oxidation", "[CH2,CH1:1][OH:2]>>[C:1]=[O:2]", [ALCOHOLS], 2),
    (9, "acid_chloride_formation", "[C:1](=[O:2])[OH].[Cl:3]S(=O)Cl>>[C:1](=[O:2])[Cl:3]", [ACIDS, [SOCL2]], 1),
    (9, "alcohol_bromination", "[CX4:1][OH].[Br:2]C(Br)(Br)Br>>[C:1][Br:2]", [ALCOHOLS, [CBR4]], 1),
    (9, "epoxide_opening", "[C:1]1[O:2][C:3]1.[N;!H0;!$(N-C=O):4]>>[N:4][C:1][C:3][O:2]", [EPOXIDES, AMINES], 1),
    (10, "bromination", "[cH:1].[Br:2]N1C(=O)CCC1=O>>[c:1][Br:2]", [PHENOLS + ["Nc1ccccc1", "COc1ccccc1"], [NBS]], 1),
]

SPECTATORS = ["CCN(CC)CC", "O", "ClCCl", "CN(C)C=O", "O=C([O-])[O-].[K+].[K+]"]


def run_one(rxn, reactants):
    prods = rxn.RunReactants(tuple(reactants))
    good = []
    for p in prods:
        mol = p[0]
        try:
            Chem.SanitizeMol(mol)
        except Exception:
            continue
        good.append(mol)
    return good


def derived_pools(rng):
    """Substrates for deprotection templates, built by forward protection."""
    boc = Chem.MolFromSmarts("[N;!H0;!$(N-C=O);!$(N-c):1]")
    pools = {"BOC_AMINES": [], "ESTERS": [], "BENZYL_ETHERS": [], "ACETONIDES": []}
    for a in AMINES:
        m = Chem.MolFromSmiles(a)
        if m.HasSubstructMatch(boc):
            r = AllChem.ReactionFromSmarts("[N;!H0;!$(N-C=O);!$(N-c):1]>>[N:1]C(=O)OC(C)(C)C")
            ps = run_one(r, [m])
            if ps:
                pools["BOC_AMINES"].append(Chem.MolToSmiles(ps[0]))
    for a in ACIDS:
        m = Chem.MolFromSmiles(a)
        for alk in ("C", "CC"):
            r = AllChem.ReactionFromSmarts("[C:1](=[O:2])[OH:3]>>[C:1](=[O:2])[O:3]" + alk)
            ps = run_one(r, [m])
            if ps:
                pools["ESTERS"].append(Chem.MolToSmiles(ps[0]))
    for a in ALCOHOLS + PHENOLS:
        m = Chem.MolFromSmiles(a)
        r = AllChem.ReactionFromSmarts("[OH:1]>>[O:1]Cc1ccccc1")
        ps = run_one(r, [m])
        if ps:
            pools["BENZYL_ETHERS"].append(Chem.MolToSmiles(ps[0]))
    for d in DIOLS:
        m = Chem.MolFromSmiles(d)
        r = AllChem.ReactionFromSmarts("[OH:1][C:2][C:3][OH:4]>>[O:1]1[C:2][C:3][O:4]C1(C)C")
        ps = run_one(r, [m])
        if ps:
            pools["ACETONIDES"].append(Chem.MolToSmiles(ps[0]))
    return pools


def mapped_reaction(rng, template_rxn, reactant_smiles):
    reactants = [Chem.MolFromSmiles(s) for s in reactant_smiles]
    if any(r is None for r in reactants):
        return None
    prods = template_rxn.RunReactants(tuple(reactants))
    if not prods:
        return None
    prods = list(prods)
    rng.shuffle(prods)
    for p in prods:
        prod = p[0]
        try:
            Chem.SanitizeMol(prod)
        except Exception:
            continue
        if "." in Chem.MolToSmiles(prod):
            continue
        # product atom -> (reactant index, reactant atom index)
        origin = {}
        center = []
        ok = True
        for atom in prod.GetAtoms():
            if not atom.HasProp("react_atom_idx"):
                ok = False
                break
            ri = atom.GetIntProp("react_idx") if atom.HasProp("react_idx") else 0
            origin[atom.GetIdx()] = (ri, atom.GetIntProp("react_atom_idx"))
            if atom.HasProp("old_mapno"):
                center.append(atom.GetIdx())
        if not ok:
            continue
        n = prod.GetNumAtoms()
        order = list(range(n))
        rng.shuffle(order)
        maps = {}
        if center and rng.random() < 0.75:
            first = rng.choice(center)
            order.remove(first)
            order.insert(0, first)
        for k, idx in enumerate(order):
            maps[idx] = k + 1
        rcopies = [Chem.Mol(r) for r in reactants]
        for r in rcopies:
            for a in r.GetAtoms():
                a.SetAtomMapNum(0)
        for idx, (ri, ai) in origin.items():
            rcopies[ri].GetAtomWithIdx(ai).SetAtomMapNum(maps[idx])
        pcopy = Chem.Mol(prod)
        for a in pcopy.GetAtoms():
            a.SetAtomMapNum(maps[a.GetIdx()])
        rs = [Chem.MolToSmiles(r, doRandom=True, isomericSmiles=True) for r in rcopies]
        if rng.random() < 0.1:
            rs.append(rng.choice(SPECTATORS))
        rng.shuffle(rs)
        ps = Chem.MolToSmiles(pcopy, doRandom=True, isomericSmiles=True)
        return ".".join(rs) + ">>" + ps
    return None


def main():
    out = sys.argv[1]
    target = int(sys.argv[2]) if len(sys.argv) > 2 else 3000
    rng = random.Random(20240531)
    pools = derived_pools(rng)
    compiled = []
    for cls, name, smarts, pool_spec, weight in TEMPLATES:
        resolved = [pools[p] if isinstance(p, str) else p for p in pool_spec]
        compiled.append((cls, name, AllChem.ReactionFromSmarts(smarts), resolved, weight))
    weights = [c[4] for c in compiled]
    rows = []
    seen = set()
    attempts = 0
    while len(rows) < target and attempts < target * 50:
        attempts += 1
        cls, name, rxn, resolved, _ = rng.choices(compiled, weights=weights)[0]
        picks = [rng.choice(p) for p in resolved]
        key = (name, tuple(picks))
        if key in seen:
            continue
        smi = mapped_reaction(rng, rxn, picks)
        if smi is None:
            continue
        seen.add(key)
        klass = str(cls) if rng.random() < 0.9 else "UNK"
        rows.append((klass, smi))
    # a few malformed rows, as real exports have them
    bad = [
        ("2", "[CH3:1][C:2](=[O:3])Cl.[NH2:4]C>>[CH3:1][C:2](=[O:3])[NH:4]C"),
        ("1", "C[C:1](=O)O>>[CH3:1][C:2](=O)O(("),
        ("6", "[CH3:1][OH:2]>>[CH3:1][O:2][Xe]"),
    ]
    for b in bad:
        rows.insert(rng.randrange(len(rows)), b)
    with open(out, "w") as fh:
        fh.write("id,class,reactants>reagents>production\n")
        for i, (klass, smi) in enumerate(rows):
            fh.write(f"DESK{i:05d},{klass},{smi}\n")
    print(f"wrote {len(rows)} rows to {out} ({attempts} attempts)")


if __name__ == "__main__":
    main()
